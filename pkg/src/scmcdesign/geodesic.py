"""Geodesic distances on a sampled manifold via a k-nearest-neighbour graph."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .design import CandidateSet, Design, greedy_design


class GraphDisconnectedError(ValueError):
    pass


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric weighted graph over sample points; ``matrix[i, j]`` is the edge length."""

    points: np.ndarray
    matrix: csr_matrix
    k: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def neighbors(self, i: int) -> list:
        row = self.matrix.getrow(i)
        return [(int(j), float(w)) for j, w in zip(row.indices, row.data)]

    def degrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def edges(self):
        """Each undirected edge once, as ``(i, j, length)`` with ``i < j``."""
        coo = self.matrix.tocoo()
        keep = coo.row < coo.col
        order = np.lexsort((coo.col[keep], coo.row[keep]))
        rows, cols, data = coo.row[keep][order], coo.col[keep][order], coo.data[keep][order]
        return list(zip(rows.tolist(), cols.tolist(), data.tolist()))

    def write_edges_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "length"])
            for i, j, w in self.edges():
                writer.writerow([i, j, repr(w)])


def _from_pairs(points, rows, cols, k) -> NeighborGraph:
    n = len(points)
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    lengths = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    if np.any(lengths == 0.0):
        raise ValueError("graph points contain duplicates; deduplicate the sample first")
    r = np.concatenate([pairs[:, 0], pairs[:, 1]])
    c = np.concatenate([pairs[:, 1], pairs[:, 0]])
    w = np.concatenate([lengths, lengths])
    mat = coo_matrix((w, (r, c)), shape=(n, n)).tocsr()
    mat.sort_indices()
    return NeighborGraph(points, mat, k)


def build_graph(points, k: int = 10) -> NeighborGraph:
    """Join each point to its ``k`` nearest neighbours, symmetrised by union.

    Raises ``GraphDisconnectedError`` rather than bridging components, since
    artificial bridges would distort the geodesics.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if k < 1 or n <= k:
        raise ValueError(f"need 1 <= k < number of points, got k={k}, n={n}")
    _, nbr = cKDTree(pts).query(pts, k=k + 1)
    rows = np.repeat(np.arange(n), k + 1)
    graph = _from_pairs(pts, rows, nbr.ravel(), k)
    n_comp, _ = connected_components(graph.matrix, directed=False)
    if n_comp > 1:
        raise GraphDisconnectedError(
            f"{k}-nearest-neighbour graph has {n_comp} connected components; increase k"
        )
    return graph


def complete_graph(points) -> NeighborGraph:
    """Clique with Euclidean edge lengths (mostly useful as a reference)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    rows, cols = np.triu_indices(n, 1)
    return _from_pairs(pts, rows, cols, n - 1)


def merge_close_points(points, radius: float) -> np.ndarray:
    """Indices of representatives after merging points linked by gaps below ``radius``.

    Points joined by a chain of pairwise distances ``< radius`` collapse to the
    lowest index among them.  Resampling leaves families of near-copies that
    would otherwise form their own k-NN components.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if radius <= 0:
        return np.arange(n)
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    _, first = np.unique(labels, return_index=True)
    return np.sort(first)


def geodesic_distances(graph: NeighborGraph, sources) -> np.ndarray:
    """Shortest-path lengths from each source (rows) to every node (columns)."""
    src = np.atleast_1d(np.asarray(sources, dtype=int))
    dist = dijkstra(graph.matrix, directed=True, indices=src)
    dist = np.atleast_2d(dist)
    if not np.all(np.isfinite(dist)):
        raise GraphDisconnectedError("unreachable node in geodesic distance computation")
    return dist


class GeodesicMetric:
    """Distance provider for greedy designs; one Dijkstra run per query."""

    kind = "geodesic"

    def __init__(self, graph: NeighborGraph):
        self.graph = graph

    def distances_from(self, points: np.ndarray, index: int) -> np.ndarray:
        if len(points) != self.graph.n:
            raise ValueError("candidate points do not match the graph nodes")
        return geodesic_distances(self.graph, [index])[0]

    def pairwise(self, a, b):
        raise NotImplementedError("geodesic pairwise distances are only defined between graph nodes")


def geodesic_cmm(points, size: int, k: int = 10, seed=None, first=None, graph: NeighborGraph | None = None):
    """Conditionally maximin design under graph geodesic distance.

    Returns ``(design, graph)``.  Points are used as given; pass a
    deduplicated array.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if graph is None:
        graph = build_graph(pts, k)
    cands = CandidateSet(pts, GeodesicMetric(graph))
    design: Design = greedy_design(cands, size, "cmm", seed=seed, first=first)
    return design, graph
