"""Space-filling designs selected from a candidate sample.

Greedy conditional designs add one candidate at a time, keeping a per-candidate
running quantity so every step costs one pass over the candidates:

* ``cmm``: running minimum distance to the design, pick the largest;
* ``ard``: running sum of reciprocal projected distances, pick the smallest;
* ``maxpro``: running sum of reciprocal products of squared 1-D distances,
  pick the smallest.

Clustering (FFF) designs cut a Ward dendrogram into ``P`` clusters and
summarise each cluster by its centroid or by a member point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import fastcluster
import numpy as np

PENALTY = 1e12
MAX_ARD_DIM = 10
CRITERIA = ("cmm", "ard", "maxpro")


class DesignError(ValueError):
    pass


# ---------------------------------------------------------------- metrics


class WeightedEuclidean:
    """``sqrt(sum_d w_d (a_d - b_d)^2)``; zero weights project onto a subspace."""

    kind = "weighted_euclidean"

    def __init__(self, weights=None):
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        if self.weights is not None:
            if np.any(self.weights < 0) or not np.any(self.weights > 0):
                raise DesignError("weights must be non-negative with at least one positive entry")

    def _w(self, dim):
        if self.weights is None:
            return np.ones(dim)
        if self.weights.shape != (dim,):
            raise DesignError(f"expected {dim} weights, got {self.weights.shape[0]}")
        return self.weights

    def distances_from(self, points: np.ndarray, index: int) -> np.ndarray:
        diff = points - points[index]
        return np.sqrt((diff * diff) @ self._w(points.shape[1]))

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt((diff * diff) @ self._w(a.shape[1]))


def weighted_distance(a, b, weights=None) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise DesignError("weights must be non-negative with at least one positive entry")
    return float(np.sqrt(np.sum(w * (a - b) ** 2)))


# ---------------------------------------------------------------- candidates


@dataclass
class CandidateSet:
    """Candidate points with exact duplicates removed.

    ``source_index[i]`` is the row of the original array that candidate ``i``
    came from, so designs can be mapped back to the sample file.
    """

    points: np.ndarray
    metric: object = None
    source_index: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.source_index is None:
            self.source_index = np.arange(len(self.points))
        if self.metric is None:
            self.metric = WeightedEuclidean()

    @classmethod
    def from_points(cls, points, metric=None, dedup: bool = True) -> "CandidateSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(pts) == 0:
            raise DesignError("empty candidate set")
        if not dedup:
            return cls(pts, metric)
        _, first = np.unique(pts, axis=0, return_index=True)
        keep = np.sort(first)
        return cls(pts[keep], metric, keep)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def distances_from(self, index: int) -> np.ndarray:
        return self.metric.distances_from(self.points, index)


def _as_candidates(cands) -> CandidateSet:
    if isinstance(cands, CandidateSet):
        return cands
    return CandidateSet(np.asarray(cands, dtype=float))


# ---------------------------------------------------------------- design record


@dataclass
class Design:
    """Ordered candidate indices plus the running per-candidate criterion cache."""

    indices: list
    psi_cache: np.ndarray
    criterion: str = "cmm"
    k: float = 1.0
    trace: list = field(default_factory=list)
    total: float = 0.0  # ard/maxpro: sum of pair terms over the whole design

    @property
    def size(self) -> int:
        return len(self.indices)

    def points(self, cands) -> np.ndarray:
        return _as_candidates(cands).points[self.indices]

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "size": self.size,
            "indices": [int(i) for i in self.indices],
            "trace": [dict(t) for t in self.trace],
        }


# ---------------------------------------------------------------- ARD / MaxPro terms


def coordinate_subsets(dim: int) -> list:
    if dim > MAX_ARD_DIM:
        raise DesignError(
            f"ARD enumerates all 2^D - 1 coordinate projections; D={dim} exceeds the limit of {MAX_ARD_DIM}"
        )
    return [c for q in range(1, dim + 1) for c in itertools.combinations(range(dim), q)]


def _subset_matrix(dim: int) -> np.ndarray:
    subsets = coordinate_subsets(dim)
    mat = np.zeros((dim, len(subsets)))
    for j, s in enumerate(subsets):
        mat[list(s), j] = 1.0
    return mat


def ard_normalizer(dim: int) -> float:
    return 1.0 / (2**dim - 1)


def _ard_terms(points: np.ndarray, y: np.ndarray, k: float, subset_mat: np.ndarray):
    """Per-candidate sum over projections of ``q^(k/2) / delta_qr^k`` against one point."""
    sq = (points - y) ** 2 @ subset_mat
    q = subset_mat.sum(axis=0)
    zero = sq == 0.0
    with np.errstate(divide="ignore"):
        terms = (q / sq) ** (k / 2.0)
    terms[zero] = PENALTY
    return terms.sum(axis=1), zero.any(axis=1)


def _maxpro_terms(points: np.ndarray, y: np.ndarray):
    """Per-candidate ``1 / prod_d (x_d - y_d)^2``, penalised on any 1-D tie."""
    sq = (points - y) ** 2
    tie = np.any(sq == 0.0, axis=1)
    with np.errstate(divide="ignore", over="ignore"):
        terms = 1.0 / np.prod(sq, axis=1)
    terms[tie] = PENALTY
    return terms, tie


def ard_increment(cands, design: Design, candidate: int, k: float = 1.0) -> float:
    """Normalised increment of the ARD sum from adding ``candidate``, computed directly."""
    cs = _as_candidates(cands)
    if not design.indices:
        raise DesignError("ARD increment needs a non-empty design")
    if candidate in design.indices:
        raise DesignError("candidate already in the design")
    x = cs.points[candidate]
    total = 0.0
    for j in design.indices:
        y = cs.points[j]
        for sub in coordinate_subsets(cs.dim):
            d2 = float(np.sum((x[list(sub)] - y[list(sub)]) ** 2))
            total += PENALTY if d2 == 0.0 else (len(sub) / d2) ** (k / 2.0)
    return ard_normalizer(cs.dim) * total


def maxpro_increment(cands, design: Design, candidate: int) -> float:
    """``{(1/p) sum_j 1 / prod_d (x_d - x_jd)^2}^(1/D)`` over the ``p`` design points."""
    cs = _as_candidates(cands)
    if not design.indices:
        raise DesignError("MaxPro increment needs a non-empty design")
    if candidate in design.indices:
        raise DesignError("candidate already in the design")
    x = cs.points[candidate]
    total = 0.0
    for j in design.indices:
        sq = (x - cs.points[j]) ** 2
        total += PENALTY if np.any(sq == 0.0) else 1.0 / float(np.prod(sq))
    return (total / len(design.indices)) ** (1.0 / cs.dim)


def ard_criterion(points, k: float = 1.0) -> float:
    """Whole-design ARD value ``{norm * sum_{i<j} sum_qr q^(k/2)/delta^k}^(-1/k)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return ard_pair_sum(pts, k) ** (-1.0 / k) if len(pts) > 1 else math.inf


def ard_pair_sum(points, k: float = 1.0) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mat = _subset_matrix(pts.shape[1])
    total = 0.0
    for i in range(1, len(pts)):
        s, _ = _ard_terms(pts[:i], pts[i], k, mat)
        total += float(s.sum())
    return ard_normalizer(pts.shape[1]) * total


def maxpro_criterion(points) -> float:
    """Whole-design MaxPro value ``{mean_{i<j} 1/prod_d delta_d^2}^(1/D)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, dim = pts.shape
    if n < 2:
        return 0.0
    total = 0.0
    for i in range(1, n):
        t, _ = _maxpro_terms(pts[:i], pts[i])
        total += float(t.sum())
    return (total / (n * (n - 1) / 2)) ** (1.0 / dim)


# ---------------------------------------------------------------- greedy loop


def _first_index(n: int, seed, first) -> int:
    if first is not None:
        if not 0 <= int(first) < n:
            raise DesignError(f"first index {first} out of range for {n} candidates")
        return int(first)
    return int(np.random.default_rng(seed).integers(n))


def greedy_design(
    cands,
    size: int,
    criterion: str = "cmm",
    k: float = 1.0,
    seed=None,
    first: int | None = None,
) -> Design:
    """Grow a design one candidate at a time by the conditional criterion.

    Ties go to the lowest candidate index.  For ``cmm`` the candidates' metric
    supplies distances, so a geodesic metric gives a geodesic design.
    """
    cs = _as_candidates(cands)
    n = cs.n
    if n == 0:
        raise DesignError("empty candidate set")
    if criterion not in CRITERIA:
        raise DesignError(f"unknown criterion {criterion!r}; choose from {', '.join(CRITERIA)}")
    if not 1 <= size <= n:
        raise DesignError(f"design size {size} must be between 1 and the number of candidates ({n})")
    if criterion == "ard" and k <= 0:
        raise DesignError("ARD order k must be positive")

    start = _first_index(n, seed, first)
    chosen = np.zeros(n, dtype=bool)
    chosen[start] = True
    indices = [start]
    trace = [{"p": 1, "selected_index": start, "criterion_value": None}]
    pts = cs.points

    if criterion == "cmm":
        cache = np.asarray(cs.distances_from(start), dtype=float).copy()
        for p in range(2, size + 1):
            masked = np.where(chosen, -np.inf, cache)
            nxt = int(np.argmax(masked))
            value = float(cache[nxt])
            chosen[nxt] = True
            indices.append(nxt)
            trace.append({"p": p, "selected_index": nxt, "criterion_value": value})
            np.minimum(cache, cs.distances_from(nxt), out=cache)
        return Design(indices, cache, "cmm", trace=trace)

    if criterion == "ard":
        mat = _subset_matrix(cs.dim)
        norm = ard_normalizer(cs.dim)
        cache, _ = _ard_terms(pts, pts[start], k, mat)
    else:
        cache, _ = _maxpro_terms(pts, pts[start])
    total = 0.0
    for p in range(2, size + 1):
        masked = np.where(chosen, np.inf, cache)
        nxt = int(np.argmin(masked))
        if criterion == "ard":
            value = norm * float(cache[nxt])
        else:
            value = (float(cache[nxt]) / (p - 1)) ** (1.0 / cs.dim)
        total += float(cache[nxt])
        chosen[nxt] = True
        indices.append(nxt)
        trace.append({"p": p, "selected_index": nxt, "criterion_value": value})
        if criterion == "ard":
            cache = cache + _ard_terms(pts, pts[nxt], k, mat)[0]
        else:
            cache = cache + _maxpro_terms(pts, pts[nxt])[0]
    if criterion == "ard":
        total *= norm
    return Design(indices, cache, criterion, k=k, trace=trace, total=total)


def cmm_design(cands, size: int, seed=None, first: int | None = None) -> Design:
    """Conditionally maximin design."""
    return greedy_design(cands, size, "cmm", seed=seed, first=first)


def mindist(points, metric=None) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        raise DesignError("minimum distance needs at least two points")
    metric = metric or WeightedEuclidean()
    d = metric.pairwise(pts, pts)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def design_mindist(design: Design, cands) -> float:
    """Minimum pairwise distance of a design under the candidates' own metric."""
    cs = _as_candidates(cands)
    if design.size < 2:
        raise DesignError("minimum distance needs at least two points")
    best = math.inf
    for a, i in enumerate(design.indices[1:], start=1):
        d = cs.distances_from(i)[design.indices[:a]]
        best = min(best, float(d.min()))
    return best


# ---------------------------------------------------------------- FFF


@dataclass
class FffDesign:
    """Cluster representatives: ``members[i]`` is a candidate index, or ``None`` for centroids."""

    points: np.ndarray
    members: list
    labels: np.ndarray
    summary: str

    @property
    def size(self) -> int:
        return len(self.points)


def ward_labels(points: np.ndarray, n_clusters: int) -> np.ndarray:
    """Ward clustering into exactly ``n_clusters``; labels ordered by first appearance.

    The dendrogram is cut by replaying its first ``N - n_clusters`` merges.
    """
    n = len(points)
    if n_clusters == n:
        return np.arange(n)
    merges = fastcluster.linkage_vector(np.asarray(points, dtype=float), method="ward")
    parent = np.arange(2 * n - 1)

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for step in range(n - n_clusters):
        a, b = int(merges[step, 0]), int(merges[step, 1])
        parent[root(a)] = n + step
        parent[root(b)] = n + step
    roots = np.array([root(i) for i in range(n)])
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    return relabel[inverse]


def fff_design(cands, size: int, summary: str = "centroid") -> FffDesign:
    cs = _as_candidates(cands)
    if not 1 <= size <= cs.n:
        raise DesignError(f"design size {size} must be between 1 and the number of candidates ({cs.n})")
    if summary not in ("centroid", "medoid_maxpro"):
        raise DesignError(f"unknown cluster summary {summary!r}")
    pts = cs.points
    labels = ward_labels(pts, size)
    reps = []
    members = []
    for c in range(size):
        idx = np.flatnonzero(labels == c)
        centroid = pts[idx].mean(axis=0)
        if summary == "centroid":
            reps.append(pts[idx[0]] if len(idx) == 1 else centroid)
            members.append(int(idx[0]) if len(idx) == 1 else None)
            continue
        if not reps:
            d = np.sum((pts[idx] - centroid) ** 2, axis=1)
            pick = int(idx[np.argmin(d)])
        else:
            score = np.zeros(len(idx))
            for r in reps:
                score += _maxpro_terms(pts[idx], r)[0]
            pick = int(idx[np.argmin(score)])
        reps.append(pts[pick])
        members.append(pick)
    return FffDesign(np.array(reps), members, labels, summary)
