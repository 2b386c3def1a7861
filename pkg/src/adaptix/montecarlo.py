"""Monte Carlo experiments over independent replicates.

A plan fixes the problem, schedule, gate, initial conditions, horizon,
replicate count, master seed, and the checkpoints at which iterates are
recorded. Replicate r draws its noise from the substream
(master_seed, trajectory lane, r), so the result set is a pure function of
the plan: the same bits come back whether replicates run serially, across
8 processes, or one at a time.

Statistics on a result set exclude diverged replicates (they are counted,
and callers decide how many are tolerable). The normality check compares
the empirical covariance of sqrt(t) (x_t - x*) against a predicted V in
Frobenius distance and the Mahalanobis-squared sample against the
chi-square law with dim degrees of freedom via the Kolmogorov-Smirnov
sup-distance, with the asymptotic 1% band 1.63/sqrt(n_replicates).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from ._rowops import norm_rows
from .asymptotics import AsymptoticPrediction
from .core import ComparatorConfig, InitialConditions, _simulate
from .errors import ConfigError, NoClosedFormError
from .noise import NoiseModel
from .problems import ProblemSpec
from .rng import COMPARATOR_LANE, E0_LANE, TRAJECTORY_LANE, substream
from .schedules import (E0Estimate, SigmoidSpec, StepSchedule, e0_exact,
                        e0_monte_carlo)

DEFAULT_COV_TOL = 0.15
DEFAULT_KS_SCALE = 1.63


def default_checkpoints(horizon: int) -> tuple:
    """Powers of ten up to the horizon, plus the horizon itself."""
    points = [10**k for k in range(1, 19) if 10**k <= horizon]
    if not points or points[-1] != horizon:
        points.append(horizon)
    return tuple(points)


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    problem: ProblemSpec
    schedule: StepSchedule
    sigmoid: SigmoidSpec
    init: InitialConditions
    horizon: int
    n_replicates: int
    master_seed: int
    checkpoints: tuple = ()
    couple_comparator: bool = False
    comparator_noise: str = "shared"  # or "independent" (negative control)
    divergence_bound: float = 1e12
    e0_mc_samples: int = 1_000_000

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_replicates < 2:
            raise ConfigError(
                f"n_replicates must be >= 2, got {self.n_replicates}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed must be a u64, got {self.master_seed}")
        checkpoints = tuple(int(t) for t in self.checkpoints)
        if not checkpoints:
            checkpoints = default_checkpoints(self.horizon)
        if sorted(set(checkpoints)) != list(checkpoints):
            raise ConfigError("checkpoints must be strictly increasing")
        if checkpoints[0] < 1 or checkpoints[-1] > self.horizon:
            raise ConfigError(
                f"checkpoints must lie in [1, horizon={self.horizon}]")
        object.__setattr__(self, "checkpoints", checkpoints)
        if self.comparator_noise not in ("shared", "independent"):
            raise ConfigError(
                f"comparator_noise must be 'shared' or 'independent', "
                f"got {self.comparator_noise!r}")
        if self.init.x0.shape[0] != self.problem.dim:
            raise ConfigError(
                f"x0 dimension {self.init.x0.shape[0]} does not match problem "
                f"dim {self.problem.dim}")


@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """Checkpointed iterates of every replicate; row r always derives from
    substream (master_seed, r) regardless of scheduling."""
    plan: ExperimentPlan
    e0: E0Estimate
    ts: np.ndarray                # (checkpoints,)
    x: np.ndarray                 # (checkpoints, replicates, dim)
    s: np.ndarray                 # (checkpoints, replicates)
    z: np.ndarray | None          # comparator iterates, if coupled
    diverged_at: np.ndarray       # (replicates,), -1 where none

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0

    @property
    def n_replicates(self) -> int:
        return self.diverged_at.shape[0]

    @property
    def diverged_fraction(self) -> float:
        return float(self.diverged.mean())

    def slot(self, t: int | None = None) -> int:
        if t is None:
            return len(self.ts) - 1
        matches = np.nonzero(self.ts == int(t))[0]
        if matches.size == 0:
            raise KeyError(f"t={t} is not a recorded checkpoint")
        return int(matches[0])


def resolve_e0(plan: ExperimentPlan) -> E0Estimate:
    """Closed-form E0 when available, otherwise seeded Monte Carlo."""
    try:
        return e0_exact(plan.sigmoid, plan.problem.noise)
    except NoClosedFormError:
        estimate = e0_monte_carlo(
            plan.sigmoid, plan.problem.noise, n_samples=plan.e0_mc_samples,
            seed=substream(plan.master_seed, E0_LANE, 0))
        if estimate.value <= 0.0:
            raise ConfigError(
                f"estimated E0 = {estimate.value:.6g} is not positive",
                assumption="B4.2")
        return estimate


def _run_block(plan: ExperimentPlan, e0_value: float, lo: int, hi: int):
    rngs = [substream(plan.master_seed, TRAJECTORY_LANE, r)
            for r in range(lo, hi)]
    comparator = None
    if plan.couple_comparator:
        comp_rngs = None
        if plan.comparator_noise == "independent":
            comp_rngs = [substream(plan.master_seed, COMPARATOR_LANE, r)
                         for r in range(lo, hi)]
        comparator = ComparatorConfig(alpha=plan.problem.jacobian_at_root,
                                      e0=e0_value, rngs=comp_rngs)
    res = _simulate(plan.problem, plan.init, plan.schedule, plan.sigmoid,
                    plan.horizon, rngs, plan.checkpoints,
                    comparator=comparator,
                    divergence_bound=plan.divergence_bound)
    return res.x, res.s, res.z, res.diverged_at


def run_replicates(plan: ExperimentPlan, workers: int = 1) -> ReplicateSet:
    """Execute the plan; the result is bit-identical for any ``workers``."""
    workers = max(1, int(workers))
    e0 = resolve_e0(plan)
    n = plan.n_replicates
    n_blocks = min(workers, n)
    base, extra = divmod(n, n_blocks)
    bounds = []
    lo = 0
    for b in range(n_blocks):
        hi = lo + base + (1 if b < extra else 0)
        bounds.append((lo, hi))
        lo = hi
    if workers == 1:
        pieces = [_run_block(plan, e0.value, lo, hi) for lo, hi in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, plan, e0.value, lo, hi)
                       for lo, hi in bounds]
            pieces = [f.result() for f in futures]
    x = np.concatenate([p[0] for p in pieces], axis=1)
    s = np.concatenate([p[1] for p in pieces], axis=1)
    z = None
    if plan.couple_comparator:
        z = np.concatenate([p[2] for p in pieces], axis=1)
    diverged_at = np.concatenate([p[3] for p in pieces])
    return ReplicateSet(plan=plan, e0=e0,
                        ts=np.asarray(plan.checkpoints, dtype=np.int64),
                        x=x, s=s, z=z, diverged_at=diverged_at)


def _alive_mask(rset: ReplicateSet) -> np.ndarray:
    ok = ~rset.diverged
    if not ok.any():
        raise ValueError("every replicate diverged; no statistics available")
    return ok


@dataclass(frozen=True)
class ConvergenceSummary:
    """Error-norm quantiles per checkpoint, plus a trend flag.

    ``decreasing`` compares the median error at the first and last
    checkpoints; it is None when only one checkpoint was recorded.
    """
    rows: list
    decreasing: bool | None


def convergence_summary(rset: ReplicateSet) -> ConvergenceSummary:
    """Per-checkpoint 50/90/99% quantiles of the error norm ||x_t - x*||."""
    ok = _alive_mask(rset)
    root = rset.plan.problem.root
    rows = []
    for i, t in enumerate(rset.ts):
        err = norm_rows(rset.x[i][ok] - root)
        rows.append({
            "t": int(t),
            "quantile_50": float(np.quantile(err, 0.50)),
            "quantile_90": float(np.quantile(err, 0.90)),
            "quantile_99": float(np.quantile(err, 0.99)),
        })
    decreasing = None
    if len(rows) >= 2:
        decreasing = rows[-1]["quantile_50"] < rows[0]["quantile_50"]
    return ConvergenceSummary(rows=rows, decreasing=decreasing)


def step_counter_drift(rset: ReplicateSet) -> list[dict]:
    """Per-checkpoint mean and sd of s_t / t, with relative deviation from
    the engine's E0."""
    ok = _alive_mask(rset)
    e0 = rset.e0.value
    rows = []
    for i, t in enumerate(rset.ts):
        ratio = rset.s[i][ok] / float(t)
        mean = float(ratio.mean())
        sd = float(ratio.std(ddof=1)) if ratio.size > 1 else 0.0
        rows.append({
            "t": int(t),
            "s_over_t_mean": mean,
            "s_over_t_sd": sd,
            "rel_dev_from_e0": abs(mean - e0) / e0,
        })
    return rows


def _ks_distance(sample: np.ndarray, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov sup-distance to a reference CDF."""
    ordered = np.sort(sample)
    count = ordered.size
    reference = cdf(ordered)
    upper = np.arange(1, count + 1) / count
    lower = np.arange(0, count) / count
    return float(max(np.max(upper - reference), np.max(reference - lower)))


def normality_stats(rows: np.ndarray, predicted_v: np.ndarray):
    """(empirical covariance, relative Frobenius error, Mahalanobis KS).

    ``rows`` are samples whose limit law is N(0, predicted_v); exposed
    separately so the pipeline can be calibrated on exact normal draws.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    dim = rows.shape[1]
    v = np.atleast_2d(np.asarray(predicted_v, dtype=np.float64))
    empirical = np.atleast_2d(np.cov(rows, rowvar=False, ddof=1))
    rel_err = float(np.linalg.norm(empirical - v, "fro")
                    / np.linalg.norm(v, "fro"))
    solved = np.linalg.solve(v, rows.T)
    mahalanobis_sq = np.sum(rows.T * solved, axis=0)
    ks = _ks_distance(mahalanobis_sq, chi2(dim).cdf)
    return empirical, rel_err, ks


@dataclass(frozen=True, eq=False)
class NormalityReport:
    t: int
    n_used: int
    empirical_cov: np.ndarray
    predicted_cov: np.ndarray
    cov_rel_err: float
    mahalanobis_ks: float
    ks_band: float
    cov_tol: float
    passed: bool


def normality_check(rset: ReplicateSet, prediction: AsymptoticPrediction,
                    t: int | None = None, cov_tol: float = DEFAULT_COV_TOL,
                    ks_scale: float = DEFAULT_KS_SCALE) -> NormalityReport:
    """Compare sqrt(t) (x_t - x*) at a checkpoint against N(0, V).

    Passes when the empirical covariance is within ``cov_tol`` relative
    Frobenius error of V and the Mahalanobis-squared KS distance stays
    inside ks_scale/sqrt(n_used). Defaults are calibrated for >= 500
    replicates.
    """
    if not prediction.stable or prediction.v is None:
        raise ValueError("normality check needs a stable prediction with V")
    ok = _alive_mask(rset)
    slot = rset.slot(t)
    t_val = int(rset.ts[slot])
    rows = np.sqrt(float(t_val)) * (rset.x[slot][ok] - rset.plan.problem.root)
    if rows.shape[0] < 2:
        raise ValueError("normality check needs at least 2 replicates")
    empirical, rel_err, ks = normality_stats(rows, prediction.v)
    band = ks_scale / np.sqrt(rows.shape[0])
    return NormalityReport(
        t=t_val, n_used=int(rows.shape[0]), empirical_cov=empirical,
        predicted_cov=np.atleast_2d(prediction.v), cov_rel_err=rel_err,
        mahalanobis_ks=ks, ks_band=float(band), cov_tol=float(cov_tol),
        passed=bool(rel_err <= cov_tol and ks <= band))


@dataclass(frozen=True)
class CouplingSummary:
    rows: list
    decreasing: bool
    drop_factor: float


def coupling_gap(rset: ReplicateSet, drop_factor: float = 0.5) -> CouplingSummary:
    """Quantiles of sqrt(t) ||x_t - z_t|| per checkpoint.

    ``decreasing`` is True when the 90% quantile at the last checkpoint has
    dropped to at most ``drop_factor`` times its first-checkpoint value -- a
    margin wide enough that an uncoupled control does not trip it.
    """
    if rset.z is None:
        raise ValueError("plan did not couple a comparator")
    ok = _alive_mask(rset)
    rows = []
    for i, t in enumerate(rset.ts):
        gap = np.sqrt(float(t)) * norm_rows(rset.x[i][ok] - rset.z[i][ok])
        rows.append({
            "t": int(t),
            "quantile_50": float(np.quantile(gap, 0.50)),
            "quantile_90": float(np.quantile(gap, 0.90)),
        })
    decreasing = bool(rows[-1]["quantile_90"] <= drop_factor * rows[0]["quantile_90"])
    return CouplingSummary(rows=rows, decreasing=decreasing,
                           drop_factor=float(drop_factor))
