"""Adaptive sequentially constrained Monte Carlo.

Particles start uniform on the region's bounding box and are pushed into the
region by annealing the probit-relaxed indicator ``prod_k Phi(-tau C_k(x))``
from ``tau = 0`` up to ``tau_target``.  Each step picks the next ``tau`` so the
effective sample size of the incremental weights stays at a target, reweights,
resamples systematically and then runs Gibbs-type random-walk Metropolis
sweeps under the current relaxed density.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .regions import Region, soft_indicator_log

logger = logging.getLogger(__name__)

MAX_STEPS = 200
DEFAULT_EQ_TOL = 0.01


class TotalViolationError(RuntimeError):
    """Every particle has zero weight."""


class ScheduleError(RuntimeError):
    """The tau schedule did not reach its target; carries the partial schedule."""

    def __init__(self, message: str, schedule: "ScmcSchedule"):
        super().__init__(message)
        self.schedule = schedule


@dataclass(frozen=True)
class ScmcConfig:
    n_particles: int = 10_000
    tau_target: float = 1e6
    ess_fraction: float = 0.5
    mh_sweeps_per_step: int = 1
    seed: int = 0
    target_acceptance: float = 0.3
    conditional_resampling: bool = False
    max_extra_sweeps: int = 8
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise ValueError("n_particles must be an integer >= 2")
        if not self.tau_target > 0:
            raise ValueError("tau_target must be positive")
        if not 0 < self.ess_fraction <= 1:
            raise ValueError("ess_fraction must be in (0, 1]")
        if self.ess_fraction * self.n_particles < 2:
            raise ValueError("ess_fraction * n_particles must be at least 2")
        if int(self.mh_sweeps_per_step) != self.mh_sweeps_per_step or self.mh_sweeps_per_step < 1:
            raise ValueError("mh_sweeps_per_step must be a positive integer")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must be in (0, 1)")
        if self.max_extra_sweeps < 0:
            raise ValueError("max_extra_sweeps must be non-negative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    @property
    def target_ess(self) -> float:
        return self.ess_fraction * self.n_particles


@dataclass
class ParticleCloud:
    """Particle positions, log-weights and their cached deviations."""

    points: np.ndarray
    log_weights: np.ndarray
    t: int = 0
    deviations: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def weights(self) -> np.ndarray:
        lw = self.log_weights - np.max(self.log_weights)
        w = np.exp(lw)
        return w / w.sum()

    def ensure_deviations(self, region: Region) -> np.ndarray:
        if self.deviations is None:
            self.deviations = region.deviation(self.points)
        return self.deviations


@dataclass
class StepRecord:
    t: int
    tau: float
    ess: float
    acceptance: list
    proposal_sds: list
    max_deviation: float
    feasible_fraction: float
    resampled: bool = True
    extra_sweeps: int = 0
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "tau": self.tau,
            "ess": self.ess,
            "acceptance": list(self.acceptance),
            "proposal_sds": list(self.proposal_sds),
            "max_deviation": self.max_deviation,
            "feasible_fraction": self.feasible_fraction,
            "resampled": self.resampled,
            "extra_sweeps": self.extra_sweeps,
            "flags": list(self.flags),
        }


@dataclass
class ScmcSchedule:
    n_particles: int
    target_ess: float
    records: list = field(default_factory=list)

    @property
    def taus(self) -> list:
        return [0.0] + [r.tau for r in self.records]

    @property
    def ess_trace(self) -> list:
        return [r.ess for r in self.records]

    @property
    def acceptance_trace(self) -> list:
        return [r.acceptance for r in self.records]

    @property
    def proposal_sds(self) -> list:
        return [r.proposal_sds for r in self.records]

    @property
    def n_steps(self) -> int:
        return len(self.records)

    @property
    def max_deviation(self) -> float:
        return self.records[-1].max_deviation if self.records else math.nan

    def to_dict(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "target_ess": self.target_ess,
            "taus": self.taus,
            "steps": [r.to_dict() for r in self.records],
        }


class TauSolution(NamedTuple):
    tau: float
    ess: float
    hit_cap: bool
    degenerate: bool = False
    nonmonotone: bool = False


def ess(log_weights) -> float:
    """Effective sample size ``(sum w)^2 / sum w^2`` from log-weights."""
    lw = np.asarray(log_weights, dtype=float)
    m = np.max(lw) if lw.size else -np.inf
    if not np.isfinite(m):
        raise TotalViolationError("all particle weights are zero: every particle violates the constraints")
    w = np.exp(lw - m)
    return float(w.sum() ** 2 / np.dot(w, w))


def init_cloud(region: Region, config: ScmcConfig, rng: np.random.Generator | None = None) -> ParticleCloud:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = int(config.n_particles)
    pts = region.bbox.sample(n, rng)
    return ParticleCloud(pts, np.full(n, -math.log(n)), t=0)


def incremental_log_weights(dev: np.ndarray, tau_prev: float, tau_next: float) -> np.ndarray:
    return soft_indicator_log(dev, tau_next) - soft_indicator_log(dev, tau_prev)


def solve_next_tau(
    cloud: ParticleCloud,
    region: Region,
    tau_prev: float,
    target_ess: float,
    tau_cap: float,
    max_iter: int = 200,
) -> TauSolution:
    """Largest ``tau`` in ``(tau_prev, tau_cap]`` keeping the incremental-weight ESS at ``target_ess``.

    Bisection keeps a bracket ``lo`` (ESS >= target) / ``hi`` (ESS < target) and
    stops once ``ESS(lo)`` is within one particle above the target.
    """
    n = cloud.n
    if not 2 <= target_ess <= n:
        raise ValueError(f"target_ess must lie in [2, {n}], got {target_ess}")
    if not tau_cap > tau_prev >= 0:
        raise ValueError("need 0 <= tau_prev < tau_cap")
    dev = cloud.ensure_deviations(region)
    prev_log = soft_indicator_log(dev, tau_prev)

    def ess_at(tau):
        return ess(soft_indicator_log(dev, tau) - prev_log)

    cap_ess = ess_at(tau_cap)
    if cap_ess >= target_ess:
        return TauSolution(float(tau_cap), cap_ess, True)

    lo, hi = float(tau_prev), float(tau_cap)
    ess_lo, ess_hi = float(n), cap_ess
    for _ in range(max_iter):
        if lo > tau_prev and ess_lo <= target_ess + 1.0:
            break
        mid = 0.5 * hi if lo == 0.0 else math.sqrt(lo * hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        e = ess_at(mid)
        if e >= target_ess:
            lo, ess_lo = mid, e
        else:
            hi, ess_hi = mid, e

    if lo > tau_prev:
        return TauSolution(lo, ess_lo, False, nonmonotone=ess_lo < ess_hi)
    # ESS drops below target immediately above tau_prev.
    return TauSolution(hi, ess_hi, False, degenerate=True, nonmonotone=ess_lo < ess_hi)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling with one uniform offset."""
    n = len(weights)
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    positions = (rng.uniform() + np.arange(n)) / n
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def reweight(cloud: ParticleCloud, region: Region, tau_prev: float, tau_next: float) -> ParticleCloud:
    """Multiply in the incremental weights and normalise, without resampling."""
    if not tau_next > tau_prev:
        raise ValueError("tau_next must exceed tau_prev")
    dev = cloud.ensure_deviations(region)
    lw = cloud.log_weights + incremental_log_weights(dev, tau_prev, tau_next)
    m = np.max(lw)
    if not np.isfinite(m):
        raise TotalViolationError("all particle weights are zero after reweighting")
    lw = lw - m
    lw -= math.log(np.exp(lw).sum())
    return ParticleCloud(cloud.points, lw, cloud.t, dev)


def resample(cloud: ParticleCloud, rng: np.random.Generator) -> ParticleCloud:
    idx = systematic_resample(cloud.weights, rng)
    dev = None if cloud.deviations is None else cloud.deviations[idx]
    return ParticleCloud(cloud.points[idx], np.full(cloud.n, -math.log(cloud.n)), cloud.t, dev)


def reweight_resample(
    cloud: ParticleCloud, region: Region, tau_prev: float, tau_next: float, rng: np.random.Generator
) -> ParticleCloud:
    return resample(reweight(cloud, region, tau_prev, tau_next), rng)


def mh_move(
    cloud: ParticleCloud,
    region: Region,
    tau: float,
    sds,
    sweeps: int,
    rng: np.random.Generator,
) -> tuple[ParticleCloud, np.ndarray]:
    """Coordinate-wise random-walk Metropolis sweeps; returns per-dimension acceptance."""
    sds = np.asarray(sds, dtype=float)
    if np.any(sds <= 0):
        raise ValueError("proposal standard deviations must be positive")
    pts = cloud.points.copy()
    dev = cloud.ensure_deviations(region).copy()
    n, dim = pts.shape
    lower, upper = region.bbox.lower, region.bbox.upper
    cur = soft_indicator_log(dev, tau)
    accepted = np.zeros(dim)
    for _ in range(int(sweeps)):
        for d in range(dim):
            prop_d = pts[:, d] + sds[d] * rng.standard_normal(n)
            u = np.log(rng.uniform(size=n))
            inside = (prop_d >= lower[d]) & (prop_d <= upper[d])
            idx = np.flatnonzero(inside)
            if idx.size == 0:
                continue
            prop = pts[idx].copy()
            prop[:, d] = prop_d[idx]
            prop_dev = region.deviation(prop)
            prop_lp = soft_indicator_log(prop_dev, tau)
            acc = u[idx] < prop_lp - cur[idx]
            hit = idx[acc]
            pts[hit] = prop[acc]
            dev[hit] = prop_dev[acc]
            cur[hit] = prop_lp[acc]
            accepted[d] += hit.size
    rate = accepted / (n * int(sweeps))
    return ParticleCloud(pts, cloud.log_weights.copy(), cloud.t, dev), rate


def adapt_proposals(sds, acceptance, target: float, widths) -> np.ndarray:
    """Scale each sd by 1.5 / 0.5 when acceptance is 0.15 above / below target."""
    sds = np.asarray(sds, dtype=float).copy()
    acceptance = np.asarray(acceptance, dtype=float)
    widths = np.broadcast_to(np.asarray(widths, dtype=float), sds.shape)
    high = acceptance > target + 0.15
    low = acceptance < target - 0.15
    sds[high] *= 1.5
    sds[low] *= 0.5
    return np.clip(sds, 1e-6 * widths, widths)


def _step_record(region, cloud, t, tau, ess_value, acc, sds, eq_tol, resampled, flags) -> StepRecord:
    dev = cloud.ensure_deviations(region)
    viol = region.violation(dev)
    feas = region.feasible_from_deviation(dev, eq_tol)
    return StepRecord(
        t=t,
        tau=float(tau),
        ess=float(ess_value),
        acceptance=[float(a) for a in acc],
        proposal_sds=[float(s) for s in sds],
        max_deviation=float(viol.max()) if viol.size else 0.0,
        feasible_fraction=float(feas.mean()),
        resampled=resampled,
        flags=flags,
    )


def run_scmc(
    region: Region, config: ScmcConfig, eq_tol: float = DEFAULT_EQ_TOL
) -> tuple[ParticleCloud, ScmcSchedule]:
    """Run the full sampler and return the final cloud and realised schedule."""
    rng = np.random.default_rng(config.seed)
    cloud = init_cloud(region, config, rng)
    cloud.ensure_deviations(region)
    widths = region.bbox.widths
    sds = 0.25 * widths
    schedule = ScmcSchedule(config.n_particles, config.target_ess)
    tau = 0.0
    t = 0
    while tau < config.tau_target:
        t += 1
        if t > config.max_steps:
            raise ScheduleError(
                f"tau schedule exceeded {config.max_steps} steps (reached tau={tau:.6g})", schedule
            )
        sol = solve_next_tau(cloud, region, tau, config.target_ess, config.tau_target)
        flags = []
        if sol.degenerate:
            flags.append("degenerate")
        if sol.nonmonotone:
            flags.append("nonmonotone")
        cloud = reweight(cloud, region, tau, sol.tau)
        resampled = True
        if config.conditional_resampling and sol.tau < config.tau_target:
            resampled = ess(cloud.log_weights) < config.target_ess
        if resampled:
            cloud = resample(cloud, rng)
        tau = sol.tau
        cloud.t = t
        cloud, acc = mh_move(cloud, region, tau, sds, config.mh_sweeps_per_step, rng)
        used_sds = sds
        sds = adapt_proposals(sds, acc, config.target_acceptance, widths)
        # A step that barely moved anything is followed by extra sweeps with the
        # shrunken proposals; tau can outpace one halving per step on thin regions.
        extra = 0
        while extra < config.max_extra_sweeps and np.any(acc < config.target_acceptance - 0.15):
            if np.array_equal(sds, used_sds):
                break
            cloud, acc = mh_move(cloud, region, tau, sds, 1, rng)
            used_sds = sds
            sds = adapt_proposals(sds, acc, config.target_acceptance, widths)
            extra += 1
        cloud.t = t
        record = _step_record(region, cloud, t, tau, sol.ess, acc, used_sds, eq_tol, resampled, flags)
        record.extra_sweeps = extra
        schedule.records.append(record)
        logger.debug("step %d tau=%.6g ess=%.1f acc=%s", t, tau, sol.ess, np.round(acc, 3))
    return cloud, schedule


def rejection_sample(region: Region, n: int, seed: int = 0, eq_tol: float = 0.0):
    """Naive rejection: uniform on the bbox, keep feasible points.  Returns (kept, acceptance)."""
    rng = np.random.default_rng(seed)
    pts = region.bbox.sample(int(n), rng)
    ok = region.feasible_from_deviation(region.deviation(pts), eq_tol)
    return pts[ok], float(ok.mean())


__all__ = [
    "ScmcConfig",
    "ParticleCloud",
    "ScmcSchedule",
    "StepRecord",
    "TauSolution",
    "TotalViolationError",
    "ScheduleError",
    "ess",
    "init_cloud",
    "solve_next_tau",
    "systematic_resample",
    "reweight",
    "resample",
    "reweight_resample",
    "mh_move",
    "adapt_proposals",
    "run_scmc",
    "rejection_sample",
]
