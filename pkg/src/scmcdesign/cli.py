"""Command line: ``scmcdesign {sample,design,bench-rejection} CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 sampler or design failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .design import (
    CandidateSet,
    DesignError,
    WeightedEuclidean,
    design_mindist,
    fff_design,
    greedy_design,
    mindist,
)
from .geodesic import GeodesicMetric, GraphDisconnectedError, geodesic_cmm, merge_close_points
from .io import (
    ConfigError,
    RunConfig,
    load_config,
    read_samples_csv,
    write_design_csv,
    write_json,
    write_samples_csv,
)
from .regions import Region
from .scmc import ScheduleError, TotalViolationError, rejection_sample, run_scmc

log = logging.getLogger("scmcdesign")

EXIT_CONFIG = 2
EXIT_FAILURE = 3


class _Failure(Exception):
    pass


def _config_summary(cfg: RunConfig, region: Region) -> dict:
    s = cfg.scmc
    return {
        "region": region.name,
        "dim": region.dim,
        "bbox": {"lower": region.bbox.lower.tolist(), "upper": region.bbox.upper.tolist()},
        "n_particles": s.n_particles,
        "tau_target": s.tau_target,
        "ess_fraction": s.ess_fraction,
        "mh_sweeps_per_step": s.mh_sweeps_per_step,
        "seed": s.seed,
        "target_acceptance": s.target_acceptance,
        "conditional_resampling": s.conditional_resampling,
        "eq_tol": cfg.eq_tol,
    }


def _sample(cfg: RunConfig, region: Region, out: Path, plot: bool):
    try:
        cloud, schedule = run_scmc(region, cfg.scmc, eq_tol=cfg.eq_tol)
    except (ScheduleError, TotalViolationError) as exc:
        partial = getattr(exc, "schedule", None)
        if partial is not None:
            write_json(out / "schedule.json", {"config": _config_summary(cfg, region), "error": str(exc),
                                               "schedule": partial.to_dict()})
        raise _Failure(f"sampler failed: {exc}") from exc
    dev = cloud.ensure_deviations(region)
    feasible = region.feasible_from_deviation(dev, cfg.eq_tol)
    write_samples_csv(out / "samples.csv", cloud.points, dev, feasible)
    write_json(out / "schedule.json", {"config": _config_summary(cfg, region), "schedule": schedule.to_dict()})
    log.info(
        "sampled %d points in %d steps; feasible fraction %.6g, max deviation %.3g",
        cloud.n, schedule.n_steps, feasible.mean(), schedule.max_deviation,
    )
    if plot:
        from .plotting import plot_deviation_histogram, plot_sample

        plot_sample(cloud.points, out / "sample.svg", region, title=f"{region.name}: N={cloud.n}")
        if region.has_equality:
            plot_deviation_histogram(dev[:, region.equality_mask], out / "deviation.svg", "deviation from the manifold")
    return cloud.points


def cmd_sample(cfg: RunConfig) -> int:
    region = cfg.region.build()
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    _sample(cfg, region, out, cfg.output.plot)
    return 0


def cmd_design(cfg: RunConfig) -> int:
    if cfg.design is None:
        raise ConfigError("missing [design] section", str(cfg.source or ""))
    spec = cfg.design
    region = cfg.region.build()
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    if spec.samples:
        try:
            sample = read_samples_csv(spec.samples)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read samples: {exc}", "[design].samples") from exc
        if sample.shape[1] != region.dim:
            raise ConfigError(f"samples have {sample.shape[1]} columns, region has dimension {region.dim}",
                              "[design].samples")
    else:
        sample = _sample(cfg, region, out, cfg.output.plot)

    seed = spec.seed if spec.seed is not None else cfg.scmc.seed
    meta: dict = {"n_samples": int(len(sample))}
    try:
        if spec.criterion == "fff":
            points, sample_index, record = _fff(sample, spec, seed, meta)
        else:
            points, sample_index, record = _greedy(sample, spec, seed, meta, out)
    except (DesignError, GraphDisconnectedError) as exc:
        raise _Failure(f"design failed: {exc}") from exc

    dev = region.deviation(points)
    feasible = region.feasible_from_deviation(dev, cfg.eq_tol)
    meta["infeasible_points"] = [i + 1 for i in np.flatnonzero(~feasible).tolist()]
    meta["n_infeasible"] = int((~feasible).sum())
    record["metadata"] = meta
    write_design_csv(out / "design.csv", points, sample_index, dev, feasible)
    write_json(out / "design.json", record)
    log.info("design of %d points (%s); %d infeasible", len(points), record["criterion"], meta["n_infeasible"])
    if cfg.output.plot:
        from .plotting import plot_design

        plot_design(sample, points, out / "design.svg", region, ~feasible,
                    title=f"{record['criterion']} design, P={len(points)}")
    return 0


def _greedy(sample, spec, seed, meta, out):
    if spec.criterion == "geodesic-cmm":
        unique = CandidateSet.from_points(sample)
        keep = merge_close_points(unique.points, spec.merge_radius)
        cands = CandidateSet(unique.points[keep], None, unique.source_index[keep])
        design, graph = geodesic_cmm(cands.points, spec.size, k=spec.neighbors, seed=seed, first=spec.first)
        cands.metric = GeodesicMetric(graph)
        graph.write_edges_csv(out / "graph_edges.csv")
        meta["neighbors"] = spec.neighbors
        meta["merge_radius"] = spec.merge_radius
    else:
        metric = WeightedEuclidean(spec.weights) if spec.weights is not None else None
        cands = CandidateSet.from_points(sample, metric)
        design = greedy_design(cands, spec.size, spec.criterion, k=spec.k, seed=seed, first=spec.first)
    meta["n_candidates"] = cands.n
    sample_index = [int(cands.source_index[i]) for i in design.indices]
    trace = [dict(t, selected_index=int(cands.source_index[t["selected_index"]])) for t in design.trace]
    record = {
        "criterion": spec.criterion,
        "size": design.size,
        "sample_indices": sample_index,
        "trace": trace,
        "mindist": design_mindist(design, cands) if design.size > 1 else None,
    }
    if spec.criterion == "ard":
        record["k"] = spec.k
    if spec.weights is not None:
        record["weights"] = [float(w) for w in spec.weights]
    return design.points(cands), sample_index, record


def _fff(sample, spec, seed, meta):
    cands = CandidateSet.from_points(sample)
    pts = cands.points
    source = cands.source_index
    if cands.n > spec.fff_max_points:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(cands.n, spec.fff_max_points, replace=False))
        pts, source = pts[keep], source[keep]
        meta["subsampled"] = True
        meta["subsample_size"] = int(spec.fff_max_points)
    else:
        meta["subsampled"] = False
    meta["n_candidates"] = int(len(pts))
    fff = fff_design(pts, spec.size, spec.summary)
    sample_index = [None if m is None else int(source[m]) for m in fff.members]
    record = {
        "criterion": "fff",
        "summary": spec.summary,
        "size": fff.size,
        "sample_indices": sample_index,
        "mindist": mindist(fff.points) if fff.size > 1 else None,
    }
    return fff.points, sample_index, record


def cmd_bench_rejection(cfg: RunConfig) -> int:
    region = cfg.region.build()
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    n = cfg.scmc.n_particles
    kept, acceptance = rejection_sample(region, n, seed=cfg.scmc.seed, eq_tol=cfg.eq_tol)
    se = math.sqrt(acceptance * (1.0 - acceptance) / n)
    try:
        cloud, schedule = run_scmc(region, cfg.scmc, eq_tol=cfg.eq_tol)
    except (ScheduleError, TotalViolationError) as exc:
        raise _Failure(f"sampler failed: {exc}") from exc
    feasible = region.feasible_from_deviation(cloud.ensure_deviations(region), cfg.eq_tol)
    result = {
        "region": region.name,
        "n": n,
        "rejection": {
            "acceptance": acceptance,
            "standard_error": se,
            "kept": int(len(kept)),
            "lost": int(n - len(kept)),
            "area_ratio_estimate": acceptance,
        },
        "scmc": {
            "returned": int(cloud.n),
            "retained_fraction": cloud.n / n,
            "feasible_fraction": float(feasible.mean()),
            "steps": schedule.n_steps,
            "taus": schedule.taus,
        },
    }
    write_json(out / "comparison.json", result)
    log.info("rejection acceptance %.4f (se %.4f); SCMC kept %d/%d", acceptance, se, cloud.n, n)
    return 0


COMMANDS = {"sample": cmd_sample, "design": cmd_design, "bench-rejection": cmd_bench_rejection}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scmcdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sample": "draw a uniform sample on a constrained region",
        "design": "build a space-filling design on a (new or existing) sample",
        "bench-rejection": "compare naive rejection sampling with SCMC",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override [scmc].seed")
        p.add_argument("--n", type=int, help="override [scmc].n_particles")
        p.add_argument("--out", help="override [output].dir")
        p.add_argument("--no-plot", action="store_true", help="skip SVG figures")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "n": args.n, "out": args.out})
        if args.no_plot:
            cfg.output.plot = False
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except _Failure as exc:
        log.error("%s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
