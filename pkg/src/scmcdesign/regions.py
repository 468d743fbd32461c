"""Constrained regions described by deviation functions.

A region is a bounding box plus a list of constraints.  Each constraint maps a
point to one real *deviation*: inequality constraints are satisfied when the
deviation is ``<= 0``, equality constraints carry ``|expression|`` and are
satisfied when it is zero.  All deviation functions are vectorised: they take an
``(N, D)`` array and return ``(N,)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import log_ndtr

INEQUALITY = "inequality"
EQUALITY = "equality"

# log_ndtr is finite for |arg| up to ~1e154; past that the square overflows.
_PROBIT_ARG_LIMIT = 1e150


class RegionError(ValueError):
    """Invalid region parameters or unreadable region source."""


class DimensionError(ValueError):
    """Point dimension does not match the region."""


@dataclass(frozen=True)
class BoundingBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.size < 1 or lower.shape != upper.shape:
            raise RegionError("bounding box needs matching non-empty lower/upper vectors")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise RegionError("bounding box bounds must be finite")
        if np.any(lower >= upper):
            raise RegionError(f"bounding box requires lower < upper, got {lower} / {upper}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))


@dataclass(frozen=True)
class Constraint:
    """One deviation component.

    ``fn`` maps an ``(N, D)`` array to the ``(N,)`` deviations.  For equality
    constraints ``fn`` must already return the absolute value.
    """

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __post_init__(self):
        if self.kind not in (INEQUALITY, EQUALITY):
            raise RegionError(f"unknown constraint kind {self.kind!r}")


@dataclass(frozen=True)
class Region:
    bbox: BoundingBox
    constraints: tuple[Constraint, ...]
    name: str = "region"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def dim(self) -> int:
        return self.bbox.dim

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def equality_mask(self) -> np.ndarray:
        return np.array([c.kind == EQUALITY for c in self.constraints], dtype=bool)

    @property
    def has_equality(self) -> bool:
        return bool(self.equality_mask.any())

    def deviation(self, x) -> np.ndarray:
        """Deviation vector(s): ``(K,)`` for one point, ``(N, K)`` for a batch."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionError(
                f"region {self.name!r} is {self.dim}-dimensional, got points of shape {np.shape(x)}"
            )
        if not self.constraints:
            out = np.zeros((pts.shape[0], 0))
        else:
            out = np.column_stack([np.asarray(c.fn(pts), dtype=float).reshape(-1) for c in self.constraints])
        return out[0] if single else out

    def violation(self, dev: np.ndarray) -> np.ndarray:
        """Per-point worst constraint violation (0 when feasible), from deviations."""
        dev = np.atleast_2d(dev)
        if dev.shape[1] == 0:
            return np.zeros(dev.shape[0])
        return np.max(np.maximum(dev, 0.0), axis=1)

    def feasible_from_deviation(self, dev: np.ndarray, eq_tol: float = 0.0) -> np.ndarray:
        dev = np.atleast_2d(dev)
        eq = self.equality_mask
        ok = np.ones(dev.shape[0], dtype=bool)
        if (~eq).any():
            ok &= np.all(dev[:, ~eq] <= 0.0, axis=1)
        if eq.any():
            ok &= np.all(dev[:, eq] <= eq_tol, axis=1)
        return ok


def deviation(region: Region, x) -> np.ndarray:
    return region.deviation(x)


def soft_indicator_log(dev, tau: float) -> np.ndarray:
    """Sum over constraints of ``log Phi(-tau * dev_k)``.

    Accepts a ``(K,)`` deviation vector (returns a scalar) or an ``(N, K)``
    batch (returns ``(N,)``).
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    dev = np.asarray(dev, dtype=float)
    arg = np.clip(-tau * dev, -_PROBIT_ARG_LIMIT, _PROBIT_ARG_LIMIT)
    return np.sum(log_ndtr(arg), axis=-1)


def is_feasible(region: Region, x, eq_tol: float = 0.0):
    if eq_tol < 0:
        raise ValueError("eq_tol must be non-negative")
    pts = np.asarray(x, dtype=float)
    ok = region.feasible_from_deviation(region.deviation(pts), eq_tol)
    return bool(ok[0]) if pts.ndim == 1 else ok


def check_nonempty(region: Region, n: int = 100_000, eq_tol: float = 0.05, seed: int = 0) -> float:
    """Fraction of bbox-uniform probe points feasible within ``eq_tol``; warns at zero."""
    rng = np.random.default_rng(seed)
    frac = float(np.mean(is_feasible(region, region.bbox.sample(n, rng), eq_tol)))
    if frac == 0.0:
        warnings.warn(
            f"no feasible point among {n} uniform probes of region {region.name!r}; "
            "the region may be empty or much smaller than its bounding box",
            RuntimeWarning,
            stacklevel=2,
        )
    return frac


# ---------------------------------------------------------------- polygons


@dataclass(frozen=True)
class PolygonSet:
    """Union of closed rings; membership by the even-odd rule over all rings."""

    rings: tuple[np.ndarray, ...]

    def __post_init__(self):
        rings = []
        for ring in self.rings:
            r = np.asarray(ring, dtype=float)
            if r.ndim != 2 or r.shape[1] != 2:
                raise RegionError("polygon rings must be sequences of 2-D vertices")
            if len(r) > 1 and np.array_equal(r[0], r[-1]):
                r = r[:-1]
            if len(r) < 3:
                raise RegionError("each polygon ring needs at least 3 distinct vertices")
            r = np.vstack([r, r[:1]])
            r.setflags(write=False)
            rings.append(r)
        if not rings:
            raise RegionError("polygon set is empty")
        object.__setattr__(self, "rings", tuple(rings))
        starts = np.vstack([r[:-1] for r in rings])
        ends = np.vstack([r[1:] for r in rings])
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_ends", ends)

    @property
    def n_edges(self) -> int:
        return len(self._starts)

    def bounds(self) -> BoundingBox:
        allv = np.vstack(self.rings)
        return BoundingBox(allv.min(axis=0), allv.max(axis=0))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd ray casting (ray towards +x)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        x0, y0 = self._starts[:, 0], self._starts[:, 1]
        x1, y1 = self._ends[:, 0], self._ends[:, 1]
        straddle_dy = y1 - y0
        for sl in _chunks(len(pts), self.n_edges):
            px = pts[sl, 0:1]
            py = pts[sl, 1:2]
            straddles = (y0 > py) != (y1 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = x0 + (py - y0) * (x1 - x0) / straddle_dy
            crossings = straddles & (px < x_cross)
            out[sl] = (np.count_nonzero(crossings, axis=1) % 2) == 1
        return out

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        """Minimum point-to-segment distance over every edge."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(len(pts))
        a = self._starts
        ab = self._ends - self._starts
        ab2 = np.einsum("ij,ij->i", ab, ab)
        for sl in _chunks(len(pts), self.n_edges):
            ap_x = pts[sl, 0:1] - a[:, 0]
            ap_y = pts[sl, 1:2] - a[:, 1]
            t = np.clip((ap_x * ab[:, 0] + ap_y * ab[:, 1]) / ab2, 0.0, 1.0)
            dx = ap_x - t * ab[:, 0]
            dy = ap_y - t * ab[:, 1]
            out[sl] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
        return out

    def distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts))
        outside = ~self.contains(pts)
        if outside.any():
            out[outside] = self.boundary_distance(pts[outside])
        return out


def _chunks(n: int, width: int, budget: int = 2_000_000):
    step = max(1, budget // max(width, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def polygon_distance(pset: PolygonSet, x) -> float | np.ndarray:
    """0 inside the union of rings, else distance to the nearest edge."""
    pts = np.asarray(x, dtype=float)
    d = pset.distance(pts)
    return float(d[0]) if pts.ndim == 1 else d


def read_geojson(path) -> PolygonSet:
    """Exterior rings of every Polygon/MultiPolygon in a GeoJSON file.

    Holes are ignored.  Accepts a FeatureCollection, a single Feature or a bare
    geometry.  Coordinates are used as planar x/y.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise RegionError(f"cannot read polygon file {path}: {exc}") from exc

    rings: list = []

    def visit(geom):
        if geom is None:
            return
        kind = geom.get("type")
        if kind == "Polygon":
            rings.append(geom["coordinates"][0])
        elif kind == "MultiPolygon":
            rings.extend(poly[0] for poly in geom["coordinates"])
        elif kind == "GeometryCollection":
            for g in geom.get("geometries", []):
                visit(g)

    kind = doc.get("type") if isinstance(doc, dict) else None
    if kind == "FeatureCollection":
        for feat in doc.get("features", []):
            visit(feat.get("geometry"))
    elif kind == "Feature":
        visit(doc.get("geometry"))
    elif kind is not None:
        visit(doc)
    if not rings:
        raise RegionError(f"no Polygon/MultiPolygon geometry found in {path}")
    return PolygonSet(tuple(np.asarray(r, dtype=float)[:, :2] for r in rings))


def polygon_region(pset: PolygonSet, bbox: BoundingBox | None = None, name: str = "polygon") -> Region:
    """Region with a single inequality component equal to the polygon distance."""
    cons = Constraint(INEQUALITY, pset.distance, label="polygon_distance")
    return Region(bbox or pset.bounds(), (cons,), name=name, metadata={"polygons": pset})


# ---------------------------------------------------------------- built-ins


def crescent_region() -> Region:
    def upper(x):
        return x[:, 0] - np.sqrt(14.0 * x[:, 1] ** 2 + 2.0)

    def lower(x):
        return np.sqrt(33.0 * x[:, 1] ** 2 + 1.0) - x[:, 0]

    cons = (
        Constraint(INEQUALITY, upper, "x1 - sqrt(14*x2^2 + 2)"),
        Constraint(INEQUALITY, lower, "sqrt(33*x2^2 + 1) - x1"),
    )
    return Region(BoundingBox([-4.0, -4.0], [4.0, 4.0]), cons, name="crescent")


def ball_region(r: float = 1.0, d: int = 2, center: Sequence[float] | None = None) -> Region:
    if r <= 0 or int(d) != d or d < 1:
        raise RegionError("ball needs r > 0 and integer d >= 1")
    d = int(d)
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if c.shape != (d,):
        raise RegionError(f"ball center must have length {d}")
    r2 = float(r) ** 2

    def fn(x):
        return np.sum((x - c) ** 2, axis=1) - r2

    cons = (Constraint(INEQUALITY, fn, "|x - c|^2 - r^2"),)
    return Region(BoundingBox(c - r, c + r), cons, name="ball")


def annulus_region(r_inner: float = 0.5, r_outer: float = 1.0) -> Region:
    if not 0 < r_inner < r_outer:
        raise RegionError("annulus needs 0 < r_inner < r_outer")
    ri2, ro2 = float(r_inner) ** 2, float(r_outer) ** 2

    def inner(x):
        return ri2 - np.sum(x**2, axis=1)

    def outer(x):
        return np.sum(x**2, axis=1) - ro2

    cons = (
        Constraint(INEQUALITY, inner, "r_inner^2 - |x|^2"),
        Constraint(INEQUALITY, outer, "|x|^2 - r_outer^2"),
    )
    return Region(BoundingBox([-r_outer] * 2, [r_outer] * 2), cons, name="annulus")


def torus_region(major: float = 2.0, minor: float = 1.0, pad: float = 0.2) -> Region:
    if not 0 < minor < major:
        raise RegionError("torus needs 0 < minor < major")
    a, b = float(major), float(minor)

    def fn(x):
        return np.abs((a - np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2)) ** 2 + x[:, 2] ** 2 - b * b)

    cons = (Constraint(EQUALITY, fn, "|(R - sqrt(x1^2 + x2^2))^2 + x3^2 - r^2|"),)
    ext = a + b + pad
    bbox = BoundingBox([-ext, -ext, -(b + pad)], [ext, ext, b + pad])
    return Region(bbox, cons, name="torus")


def canada_geojson_path() -> Path:
    """Bundled simplified Canada outline (Natural Earth 1:110m, 30 polygons)."""
    return Path(str(resources.files("scmcdesign") / "data" / "canada.geojson"))


BUILTINS = ("crescent", "ball", "annulus", "torus", "polygon-file", "canada")


def builtin_region(name: str, check: bool = False, **params) -> Region:
    """Construct a named region.

    ``polygon-file`` takes ``path`` (GeoJSON); ``canada`` uses the bundled
    fixture.  With ``check=True`` the region is probed for feasible points and
    a ``RuntimeWarning`` is issued if none are found.
    """
    try:
        if name == "crescent":
            _no_params(name, params)
            region = crescent_region()
        elif name == "ball":
            region = ball_region(**params)
        elif name == "annulus":
            region = annulus_region(**params)
        elif name == "torus":
            region = torus_region(**params)
        elif name == "polygon-file":
            path = params.pop("path", None)
            if path is None:
                raise RegionError("polygon-file region needs a 'path' parameter")
            _no_params(name, params)
            region = polygon_region(read_geojson(path), name=Path(path).stem)
        elif name == "canada":
            _no_params(name, params)
            region = polygon_region(read_geojson(canada_geojson_path()), name="canada")
        else:
            raise RegionError(f"unknown built-in region {name!r}; choose from {', '.join(BUILTINS)}")
    except TypeError as exc:
        raise RegionError(f"bad parameters for region {name!r}: {exc}") from exc
    if check:
        check_nonempty(region)
    return region


def _no_params(name, params):
    if params:
        raise RegionError(f"region {name!r} takes no parameters, got {sorted(params)}")


def bbox_region(lower, upper) -> Region:
    """Unconstrained region: the whole box."""
    return Region(BoundingBox(lower, upper), (), name="box")

