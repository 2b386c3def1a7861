"""Step-size schedules, sigmoid gates, and the expected gate increment E0.

The iteration's step size is gamma(s_t), where the counter s_t moves by
u(-y_t^T y_{t-1}) at each step: a bounded non-decreasing "gate" u rewards
sign disagreement between successive measurements. Schedules map counter
values to step sizes; gates decide how fast the counter grows. E0 is the
gate increment expected under pure noise, E[u(-xi_1^T xi_2)], the constant
that calibrates all asymptotic predictions.

Schedule families
-----------------
reciprocal   gamma(s) = 1 / max(s, s_floor)        (s_floor > 0, default 1)
power        gamma(s) = gamma0 / (1 + s)^p         (gamma0 > 0, p > 0)
constant     gamma(s) = gamma0                     (gamma0 > 0)

Gate families
-------------
constant          u = c > 0 everywhere (classic decreasing-step behaviour)
kesten            u = 0 left of the origin, u_plus right of it
plakhov_almeida   u = u_minus < 0 left, u_plus > 0 right (counter can back up)
smooth            logistic ramp from u_minus to u_plus with slope scale beta

For the two step families the value at exactly 0 follows the ``at_zero``
convention: "right" (default) takes the right limit, "left" the left limit,
"midpoint" their average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NoClosedFormError
from .noise import NoiseModel
from .report import FAIL, PASS, ValidationReport
from ._rowops import dot_rows
from .rng import as_generator

SCHEDULE_FAMILIES = ("reciprocal", "power", "constant")
SIGMOID_FAMILIES = ("constant", "kesten", "plakhov_almeida", "smooth")
AT_ZERO = ("left", "right", "midpoint")


@dataclass(frozen=True)
class StepSchedule:
    family: str
    gamma0: float = 1.0
    p: float = 1.0
    s_floor: float = 1.0

    def __post_init__(self):
        if self.family not in SCHEDULE_FAMILIES:
            raise ConfigError(f"unknown schedule family {self.family!r}")
        if self.family == "reciprocal" and self.s_floor <= 0:
            raise ConfigError(
                f"reciprocal schedule needs s_floor > 0, got {self.s_floor}")
        if self.family in ("power", "constant") and self.gamma0 <= 0:
            raise ConfigError(f"gamma0 must be > 0, got {self.gamma0}")
        if self.family == "power" and self.p <= 0:
            raise ConfigError(f"power schedule needs p > 0, got {self.p}")


def reciprocal_schedule(s_floor: float = 1.0) -> StepSchedule:
    return StepSchedule(family="reciprocal", s_floor=float(s_floor))


def power_schedule(gamma0: float, p: float) -> StepSchedule:
    return StepSchedule(family="power", gamma0=float(gamma0), p=float(p))


def constant_schedule(gamma0: float) -> StepSchedule:
    return StepSchedule(family="constant", gamma0=float(gamma0))


def gamma_eval(schedule: StepSchedule, s):
    """Step size gamma(s); accepts a scalar or an array of counter values."""
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("counter values must be >= 0")
    if schedule.family == "reciprocal":
        out = 1.0 / np.maximum(arr, schedule.s_floor)
    elif schedule.family == "power":
        out = schedule.gamma0 / np.power(1.0 + arr, schedule.p)
    else:
        out = np.full_like(arr, schedule.gamma0)
    return float(out) if np.isscalar(s) or arr.ndim == 0 else out


def validate_schedule(schedule: StepSchedule) -> ValidationReport:
    """Check the step-size conditions B2.1-B2.3.

    B2.1: gamma is non-increasing in s (also spot-checked on a grid).
    B2.2: integral of gamma(s) ds diverges.
    B2.3: integral of gamma(s)^2 ds converges.

    Verdicts are analytic per family; the sampled grid for the
    monotonicity spot check is recorded in the detail string.
    """
    report = ValidationReport()
    grid = np.concatenate([[0.0], np.logspace(-3, 9, 49)])
    vals = gamma_eval(schedule, grid)
    monotone = bool(np.all(np.diff(vals) <= 1e-15))
    report.add(
        "B2.1",
        PASS if monotone else FAIL,
        f"family={schedule.family}; non-increasing on 50-point grid "
        f"s in [0, 1e9]: {monotone}",
    )
    if schedule.family == "reciprocal":
        report.add("B2.2", PASS, "integral of 1/max(s, s_floor) diverges (log tail)")
        report.add("B2.3", PASS, "integral of 1/max(s, s_floor)^2 converges")
    elif schedule.family == "power":
        diverges = schedule.p <= 1.0
        report.add(
            "B2.2",
            PASS if diverges else FAIL,
            f"(1+s)^-p with p={schedule.p}: first integral "
            f"{'diverges' if diverges else 'converges'} (needs p <= 1)",
        )
        square_ok = 2.0 * schedule.p > 1.0
        report.add(
            "B2.3",
            PASS if square_ok else FAIL,
            f"(1+s)^-2p with p={schedule.p}: second integral "
            f"{'converges' if square_ok else 'diverges'} (needs p > 1/2)",
        )
    else:
        report.add("B2.2", PASS, "constant step: first integral diverges")
        report.add(
            "B2.3", FAIL,
            f"constant step gamma0={schedule.gamma0}: integral of gamma^2 "
            "grows linearly",
        )
    return report


@dataclass(frozen=True)
class SigmoidSpec:
    family: str
    u_minus: float
    u_plus: float
    beta: float | None = None
    at_zero: str = "right"

    def __post_init__(self):
        if self.family not in SIGMOID_FAMILIES:
            raise ConfigError(f"unknown sigmoid family {self.family!r}")
        if self.at_zero not in AT_ZERO:
            raise ConfigError(f"at_zero must be one of {AT_ZERO}, got {self.at_zero!r}")
        if self.u_plus <= 0:
            raise ConfigError(
                f"u_plus must be > 0, got {self.u_plus}", assumption="B4.1")
        if self.u_minus > self.u_plus:
            raise ConfigError(
                f"u_minus={self.u_minus} exceeds u_plus={self.u_plus}; "
                "the gate must be non-decreasing", assumption="B4.1")
        if self.family == "constant" and self.u_minus != self.u_plus:
            raise ConfigError(
                "constant gate needs u_minus == u_plus", assumption="B4.1")
        if self.family == "kesten" and self.u_minus != 0.0:
            raise ConfigError(
                f"kesten gate fixes u_minus = 0, got {self.u_minus}",
                assumption="B4.1")
        if self.family == "plakhov_almeida" and not self.u_minus < 0.0:
            raise ConfigError(
                f"plakhov_almeida needs u_minus < 0, got {self.u_minus}",
                assumption="B4.1")
        if self.family == "smooth":
            if self.beta is None or self.beta <= 0:
                raise ConfigError(
                    f"smooth gate needs beta > 0, got {self.beta}",
                    assumption="B4.1")

    @property
    def u_at_zero(self) -> float:
        """Gate value at argument 0 under the at_zero convention."""
        if self.family == "constant":
            return self.u_plus
        if self.family == "smooth":
            return self.u_minus + 0.5 * (self.u_plus - self.u_minus)
        if self.at_zero == "left":
            return self.u_minus
        if self.at_zero == "right":
            return self.u_plus
        return 0.5 * (self.u_minus + self.u_plus)


def constant_gate(c: float) -> SigmoidSpec:
    return SigmoidSpec(family="constant", u_minus=float(c), u_plus=float(c))


def kesten_gate(u_plus: float = 1.0, at_zero: str = "right") -> SigmoidSpec:
    return SigmoidSpec(family="kesten", u_minus=0.0, u_plus=float(u_plus),
                       at_zero=at_zero)


def plakhov_almeida_gate(u_minus: float, u_plus: float,
                         at_zero: str = "right") -> SigmoidSpec:
    return SigmoidSpec(family="plakhov_almeida", u_minus=float(u_minus),
                       u_plus=float(u_plus), at_zero=at_zero)


def smooth_gate(u_minus: float, u_plus: float, beta: float) -> SigmoidSpec:
    return SigmoidSpec(family="smooth", u_minus=float(u_minus),
                       u_plus=float(u_plus), beta=float(beta))


def sigmoid_eval(sigmoid: SigmoidSpec, v):
    """Gate value u(v); accepts a scalar or an array."""
    arr = np.asarray(v, dtype=np.float64)
    if sigmoid.family == "constant":
        out = np.full_like(arr, sigmoid.u_plus)
    elif sigmoid.family == "smooth":
        out = sigmoid.u_minus + (sigmoid.u_plus - sigmoid.u_minus) * expit(
            arr / sigmoid.beta)
    else:
        out = np.where(
            arr < 0.0, sigmoid.u_minus,
            np.where(arr > 0.0, sigmoid.u_plus, sigmoid.u_at_zero))
    return float(out) if np.isscalar(v) or arr.ndim == 0 else out


@dataclass(frozen=True)
class E0Estimate:
    """Expected gate increment under pure noise, E[u(-xi_1^T xi_2)]."""
    value: float
    stderr: float
    method: str  # "exact" | "monte_carlo"
    n_samples: int = 0


def e0_exact(sigmoid: SigmoidSpec, noise: NoiseModel) -> E0Estimate:
    """Closed-form E0 where one exists.

    * constant gate: E0 = c for any noise;
    * kesten gate with continuous, sign-symmetric noise: the inner product
      xi_1^T xi_2 is then symmetric about 0 with no atom there, so
      E0 = u_plus / 2.

    Everything else raises NoClosedFormError; use :func:`e0_monte_carlo`.
    """
    if sigmoid.family == "constant":
        return E0Estimate(value=sigmoid.u_plus, stderr=0.0, method="exact")
    if sigmoid.family == "kesten":
        if noise.is_continuous and noise.is_sign_symmetric:
            return E0Estimate(value=0.5 * sigmoid.u_plus, stderr=0.0,
                              method="exact")
        raise NoClosedFormError(
            "kesten closed form needs continuous sign-symmetric noise; "
            f"got kind={noise.kind!r} (continuous={noise.is_continuous})")
    raise NoClosedFormError(
        f"no closed-form E0 for family {sigmoid.family!r}")


_E0_BLOCK = 100_000


def e0_monte_carlo(sigmoid: SigmoidSpec, noise: NoiseModel,
                   n_samples: int = 1_000_000, seed=0) -> E0Estimate:
    """Monte Carlo E0 over ``n_samples`` independent noise pairs.

    Deterministic given ``seed`` (an int, SeedSequence, or Generator).
    stderr is the sample standard deviation over sqrt(n_samples). A
    non-positive estimate more than 3 standard errors below zero means the
    configuration cannot satisfy the positive-increment requirement and
    raises a ConfigError citing B4.2.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if sigmoid.family == "constant":
        # the integrand is identically c: the sample mean is exact and
        # summation round-off would only obscure that
        return E0Estimate(value=sigmoid.u_plus, stderr=0.0,
                          method="monte_carlo", n_samples=int(n_samples))
    rng = as_generator(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        count = min(_E0_BLOCK, n_samples - done)
        xi1 = noise.sample_block(rng, count)
        xi2 = noise.sample_block(rng, count)
        vals = sigmoid_eval(sigmoid, -dot_rows(xi1, xi2))
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
        done += count
    value = total / n_samples
    var = max(total_sq - n_samples * value * value, 0.0) / (n_samples - 1)
    stderr = math.sqrt(var / n_samples)
    if value <= 0.0 and abs(value) > 3.0 * stderr:
        raise ConfigError(
            f"estimated E0 = {value:.6g} +/- {stderr:.2g} is not positive",
            assumption="B4.2")
    return E0Estimate(value=value, stderr=stderr, method="monte_carlo",
                      n_samples=int(n_samples))
