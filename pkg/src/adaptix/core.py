"""The adaptive step-size stochastic approximation iteration.

One step, given the previous iterate x, counter s, and previous
measurement y_prev:

    y  = phi(x) + xi               (one fresh noise draw per step)
    x' = x - gamma(s) * y
    s' = (s + u(-y^T y_prev))^+    from the second measurement onward

The first step has no previous measurement; it spends the initial counter
s0 on the step size and installs the staged initial counter s1 as the
counter value at t = 1. Counter updates proper start at t = 2.

The module also provides the decreasing-step comparator process

    z_t = z_{t-1} - (1/(E0 t)) (alpha z_{t-1} + xi_t),   t = 1, 2, ...

whose coupling to the main run (same noise stream) underlies the
normal-limit diagnostics.

Determinism contract
--------------------
All trajectory code funnels into one batch kernel that vectorises across
replicates using only row-local arithmetic (see ``_rowops``), and noise is
drawn in fixed blocks of ``NOISE_CHUNK`` steps from per-replicate
substreams. Consequences: a single run equals row r of a batch seeded with
the same (master seed, replicate) substream bit for bit, and batch results
do not depend on how replicates are grouped into batches or workers.
``NOISE_CHUNK`` is part of the reproducibility contract; changing it
changes every sampled trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rowops import apply_rows, dot_rows
from .errors import (ConfigError, DimensionMismatchError,
                     DivergedTrajectoryError, NonFiniteMeasurementError)
from .noise import NoiseModel
from .problems import ProblemSpec, field_eval
from .rng import as_generator
from .schedules import SigmoidSpec, StepSchedule, gamma_eval, sigmoid_eval

#: Noise block length for every trajectory path (reproducibility contract).
NOISE_CHUNK = 1024

#: Default guard: a trajectory whose norm exceeds this is declared diverged.
DEFAULT_DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class AlgoState:
    """Iteration state at time t.

    ``y_prev`` is the measurement that produced this state (None at t = 0).
    ``s_staged`` holds the initial counter destined for t = 1 until the
    first measurement lands; it is None from then on.
    """
    t: int
    x: np.ndarray
    s: float
    y_prev: np.ndarray | None = None
    s_staged: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("state x must be finite")
        object.__setattr__(self, "x", x)
        if not (np.isfinite(self.s) and self.s >= 0.0):
            raise ValueError(f"counter must be finite and >= 0, got {self.s}")
        if self.y_prev is not None:
            y = np.asarray(self.y_prev, dtype=np.float64).reshape(-1)
            if y.shape != x.shape:
                raise DimensionMismatchError(
                    f"y_prev shape {y.shape} does not match x {x.shape}")
            object.__setattr__(self, "y_prev", y)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class InitialConditions:
    """x0 plus the two seed counters: s0 prices the first step, s1 becomes
    the counter value at t = 1."""
    x0: np.ndarray
    s0: float = 1.0
    s1: float = 1.0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "x0", x0)
        for label, value in (("s0", self.s0), ("s1", self.s1)):
            if not (np.isfinite(value) and value >= 0.0):
                raise ValueError(f"{label} must be finite and >= 0, got {value}")

    def initial_state(self) -> AlgoState:
        return AlgoState(t=0, x=self.x0.copy(), s=float(self.s0),
                         y_prev=None, s_staged=float(self.s1))


@dataclass
class Trajectory:
    """Recorded states (every ``record_stride``-th one, plus the final)."""
    states: list[AlgoState]
    record_stride: int
    seed: object = None
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> AlgoState:
        return self.states[-1]

    def ts(self) -> np.ndarray:
        return np.array([st.t for st in self.states], dtype=np.int64)

    def xs(self) -> np.ndarray:
        return np.stack([st.x for st in self.states], axis=0)

    def ss(self) -> np.ndarray:
        return np.array([st.s for st in self.states], dtype=np.float64)


def sa_step(state: AlgoState, y, schedule: StepSchedule,
            sigmoid: SigmoidSpec) -> AlgoState:
    """Advance one step given the fresh measurement ``y``.

    The update uses gamma at the *current* counter, then moves the counter
    with the gate applied to minus the inner product of successive
    measurements (clamped at zero). On the very first step the new counter
    comes from the staged initial value instead.
    """
    y_arr = np.asarray(y, dtype=np.float64).reshape(-1)
    if y_arr.shape != state.x.shape:
        raise DimensionMismatchError(
            f"measurement shape {y_arr.shape} does not match state {state.x.shape}")
    if not np.all(np.isfinite(y_arr)):
        raise NonFiniteMeasurementError(f"measurement at t={state.t + 1} is not finite")
    gamma = gamma_eval(schedule, state.s)
    x_new = state.x - gamma * y_arr
    if state.y_prev is None:
        if state.s_staged is None:
            raise ConfigError(
                "first step needs the staged initial counter s1 on the state")
        s_new = float(state.s_staged)
    else:
        increment = sigmoid_eval(sigmoid, -float(dot_rows(y_arr, state.y_prev)))
        s_new = max(state.s + increment, 0.0)
    return AlgoState(t=state.t + 1, x=x_new, s=s_new, y_prev=y_arr.copy(),
                     s_staged=None)


@dataclass(frozen=True)
class ComparatorConfig:
    """Comparator drift and step scale; ``rngs`` None means the comparator
    replays the main run's noise (coupled), otherwise it draws from the
    given independent streams."""
    alpha: np.ndarray
    e0: float
    rngs: list | None = None


@dataclass
class SimResult:
    ts: np.ndarray              # recorded times, ascending
    x: np.ndarray               # (checkpoints, replicates, dim)
    s: np.ndarray               # (checkpoints, replicates)
    y: np.ndarray               # (checkpoints, replicates, dim)
    z: np.ndarray | None        # comparator iterates, same layout as x
    diverged_at: np.ndarray     # step of divergence per replicate, -1 if none
    final_x: np.ndarray
    final_s: np.ndarray
    final_y: np.ndarray

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0


def _simulate(problem: ProblemSpec, init: InitialConditions,
              schedule: StepSchedule, sigmoid: SigmoidSpec, horizon: int,
              rngs: list, record_ts, comparator: ComparatorConfig | None = None,
              divergence_bound: float = DEFAULT_DIVERGENCE_BOUND) -> SimResult:
    """Batch kernel: all replicates advance in lockstep.

    A replicate whose next iterate would exceed the divergence guard is
    frozen at its last finite state (recorded checkpoints from then on
    repeat that state) and marked in ``diverged_at``. When a comparator is
    configured it consumes exactly the noise vector of the same step,
    either shared with the main run or from its own streams.
    """
    n_rep = len(rngs)
    dim = problem.dim
    horizon = int(horizon)
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    ts = np.asarray(sorted({int(t) for t in record_ts}), dtype=np.int64)
    if ts.size and (ts[0] < 0 or ts[-1] > horizon):
        raise ValueError(f"recorded times must lie in [0, {horizon}]")
    slot_of = np.full(horizon + 1, -1, dtype=np.int64)
    for i, t in enumerate(ts):
        slot_of[t] = i

    x = np.tile(init.x0, (n_rep, 1))
    s = np.full(n_rep, float(init.s0))
    y_prev = np.zeros((n_rep, dim))
    alive = np.ones(n_rep, dtype=bool)
    diverged_at = np.full(n_rep, -1, dtype=np.int64)
    bound_sq = float(divergence_bound) ** 2

    n_slots = ts.size
    x_rec = np.zeros((n_slots, n_rep, dim))
    s_rec = np.zeros((n_slots, n_rep))
    y_rec = np.zeros((n_slots, n_rep, dim))
    z = z_rec = None
    if comparator is not None:
        z = np.tile(init.x0, (n_rep, 1))
        z_rec = np.zeros((n_slots, n_rep, dim))

    def record(t):
        slot = slot_of[t]
        if slot >= 0:
            x_rec[slot] = x
            s_rec[slot] = s
            y_rec[slot] = y_prev
            if z is not None:
                z_rec[slot] = z

    record(0)
    noise = problem.noise
    t = 1
    stopped_early = False
    while t <= horizon and not stopped_early:
        span = min(NOISE_CHUNK, horizon - t + 1)
        xi = np.empty((n_rep, span, dim))
        for r in range(n_rep):
            xi[r] = noise.sample_block(rngs[r], span)
        xi_z = None
        if comparator is not None and comparator.rngs is not None:
            xi_z = np.empty_like(xi)
            for r in range(n_rep):
                xi_z[r] = noise.sample_block(comparator.rngs[r], span)
        for k in range(span):
            tk = t + k
            xi_k = xi[:, k, :]
            y = field_eval(problem, x) + xi_k
            gamma = gamma_eval(schedule, s)
            x_new = x - gamma[:, None] * y
            norm_sq = dot_rows(x_new, x_new)
            bad = ~np.isfinite(norm_sq) | (norm_sq > bound_sq)
            if tk == 1:
                s_new = np.full(n_rep, float(init.s1))
            else:
                s_new = np.maximum(
                    s + sigmoid_eval(sigmoid, -dot_rows(y, y_prev)), 0.0)
            advance = alive & ~bad
            newly_dead = alive & bad
            x = np.where(advance[:, None], x_new, x)
            s = np.where(advance, s_new, s)
            y_prev = np.where(advance[:, None], y, y_prev)
            if newly_dead.any():
                diverged_at[newly_dead] = tk
                alive &= ~bad
            if comparator is not None:
                zxi = xi_k if xi_z is None else xi_z[:, k, :]
                z = z - (1.0 / (comparator.e0 * tk)) * (
                    apply_rows(comparator.alpha, z) + zxi)
            record(tk)
            if not alive.any() and comparator is None:
                for rest in range(tk + 1, horizon + 1):
                    record(rest)
                stopped_early = True
                break
        t += span
    return SimResult(ts=ts, x=x_rec, s=s_rec, y=y_rec, z=z_rec,
                     diverged_at=diverged_at, final_x=x, final_s=s,
                     final_y=y_prev)


def _stride_ts(horizon: int, record_stride: int) -> list[int]:
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    ts = list(range(0, horizon + 1, record_stride))
    if ts[-1] != horizon:
        ts.append(horizon)
    return ts


def run_trajectory(problem: ProblemSpec, init: InitialConditions,
                   schedule: StepSchedule, sigmoid: SigmoidSpec, horizon: int,
                   seed, record_stride: int = 1,
                   divergence_bound: float = DEFAULT_DIVERGENCE_BOUND) -> Trajectory:
    """Simulate one trajectory, drawing one noise vector per step.

    Records every ``record_stride``-th state plus the final one. An iterate
    crossing ``divergence_bound`` in norm raises DivergedTrajectoryError
    carrying the last finite state and the truncated recording.
    """
    rng = as_generator(seed)
    res = _simulate(problem, init, schedule, sigmoid, horizon, [rng],
                    _stride_ts(horizon, record_stride),
                    divergence_bound=divergence_bound)
    meta = {"kind": "trajectory", "problem": problem.name,
            "schedule": schedule.family, "sigmoid": sigmoid.family,
            "horizon": horizon}
    if res.diverged_at[0] >= 0:
        t_div = int(res.diverged_at[0])
        states = _states_from(res, init, upto=t_div - 1)
        partial = Trajectory(states=states, record_stride=record_stride,
                             seed=seed, meta=meta)
        last = AlgoState(t=t_div - 1, x=res.final_x[0], s=float(res.final_s[0]),
                         y_prev=res.final_y[0] if t_div > 1 else None,
                         s_staged=float(init.s1) if t_div == 1 else None)
        raise DivergedTrajectoryError(
            f"iterate norm crossed {divergence_bound:.3g} at step {t_div}",
            state=last, t=t_div, trajectory=partial)
    return Trajectory(states=_states_from(res, init), record_stride=record_stride,
                      seed=seed, meta=meta)


def _states_from(res: SimResult, init: InitialConditions,
                 upto: int | None = None) -> list[AlgoState]:
    states = []
    for i, t in enumerate(res.ts):
        if upto is not None and t > upto:
            break
        if t == 0:
            states.append(init.initial_state())
        else:
            states.append(AlgoState(t=int(t), x=res.x[i, 0], s=float(res.s[i, 0]),
                                    y_prev=res.y[i, 0]))
    return states


def run_comparator(alpha, e0: float, x0, noise: NoiseModel, horizon: int,
                   seed, record_stride: int = 1) -> Trajectory:
    """Simulate the decreasing-step comparator driven by ``noise``.

    Seeding with the same stream as a main run replays that run's noise
    exactly (the comparator consumes one noise vector per step in the same
    block layout), which is what "coupled" means throughout this package.
    Comparator states have no counter; their ``s`` is reported as 0.
    """
    alpha_m = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    x0_arr = np.asarray(x0, dtype=np.float64).reshape(-1)
    dim = x0_arr.shape[0]
    if alpha_m.shape != (dim, dim):
        raise DimensionMismatchError(
            f"alpha shape {alpha_m.shape} does not match x0 dim {dim}")
    if noise.dim != dim:
        raise DimensionMismatchError(
            f"noise dim {noise.dim} does not match x0 dim {dim}")
    if e0 <= 0:
        raise ValueError(f"E0 must be > 0, got {e0}")
    rng = as_generator(seed)
    horizon = int(horizon)
    ts = _stride_ts(horizon, record_stride)
    slot_of = {t: i for i, t in enumerate(ts)}
    z = x0_arr.copy()[None, :]
    z_rec = np.zeros((len(ts), dim))
    if 0 in slot_of:
        z_rec[slot_of[0]] = z[0]
    t = 1
    while t <= horizon:
        span = min(NOISE_CHUNK, horizon - t + 1)
        xi = noise.sample_block(rng, span)[None, :, :]
        for k in range(span):
            tk = t + k
            z = z - (1.0 / (e0 * tk)) * (apply_rows(alpha_m, z) + xi[:, k, :])
            if tk in slot_of:
                z_rec[slot_of[tk]] = z[0]
        t += span
    states = [AlgoState(t=int(t_i), x=z_rec[i], s=0.0)
              for i, t_i in enumerate(ts)]
    return Trajectory(states=states, record_stride=record_stride, seed=seed,
                      meta={"kind": "comparator", "e0": float(e0),
                            "horizon": horizon})
