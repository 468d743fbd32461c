"""Run configuration (TOML) and CSV/JSON result files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .dsl import ParseError, dsl_region
from .regions import BoundingBox, Region, RegionError, builtin_region, polygon_region, read_geojson
from .scmc import DEFAULT_EQ_TOL, ScmcConfig

DESIGN_CRITERIA = ("cmm", "ard", "maxpro", "fff", "geodesic-cmm")
FFF_MAX_POINTS = 30_000


class ConfigError(ValueError):
    """Bad or unreadable configuration; ``where`` locates the problem."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class RegionSpec:
    builtin: str | None = None
    params: dict = field(default_factory=dict)
    geojson: str | None = None
    constraints: list | None = None
    lower: list | None = None
    upper: list | None = None

    def build(self) -> Region:
        try:
            if self.builtin is not None:
                region = builtin_region(self.builtin, **dict(self.params))
            elif self.geojson is not None:
                region = polygon_region(read_geojson(self.geojson), name=Path(self.geojson).stem)
            else:
                if self.lower is None or self.upper is None:
                    raise ConfigError("constraint lists need bbox.lower and bbox.upper", "[region]")
                return dsl_region(self.constraints, self.lower, self.upper)
        except ParseError as exc:
            raise ConfigError(str(exc), "[region].constraints") from exc
        except RegionError as exc:
            raise ConfigError(str(exc), "[region]") from exc
        if self.lower is not None or self.upper is not None:
            if self.lower is None or self.upper is None:
                raise ConfigError("bbox override needs both lower and upper", "[region].bbox")
            try:
                bbox = BoundingBox(self.lower, self.upper)
            except RegionError as exc:
                raise ConfigError(str(exc), "[region].bbox") from exc
            if bbox.dim != region.dim:
                raise ConfigError(f"bbox has dimension {bbox.dim}, region has {region.dim}", "[region].bbox")
            region = Region(bbox, region.constraints, region.name, region.metadata)
        return region


@dataclass
class DesignSpec:
    criterion: str = "cmm"
    size: int = 20
    weights: list | None = None
    k: float = 1.0
    summary: str = "centroid"
    neighbors: int = 10
    merge_radius: float = 1e-3
    first: int | None = None
    seed: int | None = None
    samples: str | None = None
    fff_max_points: int = FFF_MAX_POINTS


@dataclass
class OutputSpec:
    dir: str = "out"
    plot: bool = True
    formats: list = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    region: RegionSpec
    scmc: ScmcConfig
    eq_tol: float = DEFAULT_EQ_TOL
    design: DesignSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    source: Path | None = None


def _take(table: dict, cls, where: str, skip=()):
    names = {f.name for f in fields(cls)} - set(skip)
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", where)
    return {k: v for k, v in table.items() if k in names}


def _resolve(path: str | None, base: Path) -> str | None:
    if path is None:
        return None
    p = Path(path)
    return str(p if p.is_absolute() else base / p)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a TOML run configuration.

    ``overrides`` may set ``seed``, ``n`` and ``out`` (the CLI flags).
    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror or exc}", str(path)) from exc
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    return config_from_dict(doc, path.parent, overrides, source=path)


def config_from_dict(doc: dict, base: Path = Path("."), overrides: dict | None = None, source=None) -> RunConfig:
    overrides = overrides or {}
    unknown = sorted(set(doc) - {"region", "scmc", "design", "output"})
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}")
    if "region" not in doc:
        raise ConfigError("missing [region] section")

    reg = dict(doc["region"])
    bbox = reg.pop("bbox", None)
    allowed = {"builtin", "params", "geojson", "constraints"}
    bad = sorted(set(reg) - allowed)
    if bad:
        raise ConfigError(f"unknown key(s) {', '.join(bad)}", "[region]")
    sources = [k for k in ("builtin", "geojson", "constraints") if k in reg]
    if len(sources) != 1:
        raise ConfigError("specify exactly one of builtin, geojson, constraints", "[region]")
    region = RegionSpec(**reg)
    region.geojson = _resolve(region.geojson, base)
    if region.builtin == "polygon-file" and "path" in region.params:
        region.params = dict(region.params, path=_resolve(region.params["path"], base))
    if region.constraints is not None and not isinstance(region.constraints, list):
        region.constraints = [region.constraints]
    if bbox is not None:
        if not isinstance(bbox, dict) or set(bbox) - {"lower", "upper"}:
            raise ConfigError("bbox must be a table with lower and upper", "[region].bbox")
        region.lower = bbox.get("lower")
        region.upper = bbox.get("upper")

    scmc_table = dict(doc.get("scmc", {}))
    eq_tol = float(scmc_table.pop("eq_tol", DEFAULT_EQ_TOL))
    if "seed" in overrides and overrides["seed"] is not None:
        scmc_table["seed"] = overrides["seed"]
    if "n" in overrides and overrides["n"] is not None:
        scmc_table["n_particles"] = overrides["n"]
    try:
        scmc = ScmcConfig(**_take(scmc_table, ScmcConfig, "[scmc]"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "[scmc]") from exc
    if eq_tol < 0:
        raise ConfigError("eq_tol must be non-negative", "[scmc].eq_tol")

    design = None
    if "design" in doc:
        design = DesignSpec(**_take(dict(doc["design"]), DesignSpec, "[design]"))
        if design.criterion not in DESIGN_CRITERIA:
            raise ConfigError(
                f"unknown criterion {design.criterion!r}; choose from {', '.join(DESIGN_CRITERIA)}",
                "[design].criterion",
            )
        if int(design.size) != design.size or design.size < 1:
            raise ConfigError("size must be a positive integer", "[design].size")
        if design.summary not in ("centroid", "medoid_maxpro"):
            raise ConfigError("summary must be centroid or medoid_maxpro", "[design].summary")
        design.samples = _resolve(design.samples, base)

    output = OutputSpec(**_take(dict(doc.get("output", {})), OutputSpec, "[output]"))
    if overrides.get("out") is not None:
        output.dir = overrides["out"]
    else:
        output.dir = _resolve(output.dir, base)
    return RunConfig(region, scmc, eq_tol, design, output, source)


# ---------------------------------------------------------------- writers


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return "%.17g" % x


def write_samples_csv(path, points: np.ndarray, deviations: np.ndarray, feasible: np.ndarray) -> None:
    n, dim = points.shape
    k = deviations.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow([f"x{d + 1}" for d in range(dim)] + ["feasible"] + [f"dev{j + 1}" for j in range(k)])
        for i in range(n):
            writer.writerow(
                [fmt(v) for v in points[i]] + [int(feasible[i])] + [fmt(v) for v in deviations[i]]
            )


def read_samples_csv(path) -> np.ndarray:
    """The ``x1..xD`` columns of a samples file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
        if not cols:
            raise ValueError(f"{path}: no x1..xD columns")
        rows = [[float(row[i]) for i in cols] for row in reader if row]
    return np.array(rows, dtype=float).reshape(len(rows), len(cols))


def write_design_csv(path, points, sample_index, deviations, feasible) -> None:
    points = np.atleast_2d(points)
    dim = points.shape[1]
    k = deviations.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(
            ["order", "sample_index"]
            + [f"x{d + 1}" for d in range(dim)]
            + ["feasible"]
            + [f"dev{j + 1}" for j in range(k)]
        )
        for i, x in enumerate(points):
            idx = sample_index[i]
            writer.writerow(
                [i + 1, "" if idx is None else int(idx)]
                + [fmt(v) for v in x]
                + [int(feasible[i])]
                + [fmt(v) for v in deviations[i]]
            )


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")
