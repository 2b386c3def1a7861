"""Strict JSON run configuration.

Every key is checked: unknown keys are rejected with their dotted path,
wrong types name the offending path, and omitted keys fall back to
documented defaults. ``canonical_config`` renders the fully resolved
configuration back to a plain dict (all defaults explicit) so the echoed
config.json is a faithful, replayable record of the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import InitialConditions
from .errors import ConfigError
from .montecarlo import (DEFAULT_COV_TOL, DEFAULT_KS_SCALE, ExperimentPlan,
                         default_checkpoints)
from .noise import (NoiseModel, gaussian_noise, scaled_rademacher_noise,
                    uniform_ball_noise)
from .problems import ProblemSpec, cubic_problem, linear_problem, tanh_problem
from .schedules import SigmoidSpec, StepSchedule

DEFAULT_MAX_DIVERGED_FRACTION = 0.01
NORMALITY_MIN_REPLICATES = 500

_MISSING = object()


def _dotted(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _check_keys(data: dict, path: str, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        names = ", ".join(_dotted(path, k) for k in unknown)
        raise ConfigError(f"unknown key(s): {names}")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    return int(value)


def _boolean(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{path} must be true or false, got {value!r}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path} must be a string, got {value!r}")
    return value


def _vector(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path} must be a non-empty list of numbers")
    return np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _matrix(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value \
            or not all(isinstance(row, list) for row in value):
        raise ConfigError(f"{path} must be a list of rows")
    rows = [_vector(row, f"{path}[{i}]") for i, row in enumerate(value)]
    if len({row.shape[0] for row in rows}) != 1:
        raise ConfigError(f"{path} rows have inconsistent lengths")
    return np.vstack(rows)


def _parse_noise(data, path: str, default_dim: int | None) -> NoiseModel:
    kind = _string(data.get("kind", "gaussian"), _dotted(path, "kind"))
    if kind == "gaussian":
        _check_keys(data, path, ("kind", "dim", "cov"))
        dim = data.get("dim")
        if dim is not None:
            dim = _integer(dim, _dotted(path, "dim"))
        cov = data.get("cov", 1.0)
        cov_path = _dotted(path, "cov")
        if isinstance(cov, list):
            if cov and isinstance(cov[0], list):
                cov = _matrix(cov, cov_path)
            else:
                cov = np.diag(_vector(cov, cov_path))
        else:
            scale = _number(cov, cov_path)
            cov = scale * np.eye(dim or default_dim or 1)
        return gaussian_noise(cov)
    if kind == "uniform_ball":
        _check_keys(data, path, ("kind", "dim", "radius"))
        dim = data.get("dim", default_dim)
        if dim is None:
            raise ConfigError(f"{_dotted(path, 'dim')} is required")
        return uniform_ball_noise(
            _integer(dim, _dotted(path, "dim")),
            _number(data.get("radius", 1.0), _dotted(path, "radius")))
    if kind == "scaled_rademacher":
        _check_keys(data, path, ("kind", "dim", "scale"))
        dim = data.get("dim", default_dim)
        if dim is None:
            raise ConfigError(f"{_dotted(path, 'dim')} is required")
        return scaled_rademacher_noise(
            _integer(dim, _dotted(path, "dim")),
            _number(data.get("scale", 1.0), _dotted(path, "scale")))
    raise ConfigError(f"{_dotted(path, 'kind')} must be one of gaussian, "
                      f"uniform_ball, scaled_rademacher; got {kind!r}")


def _infer_dim(data: dict, path: str) -> int | None:
    if "dim" in data:
        return _integer(data["dim"], _dotted(path, "dim"))
    matrix = data.get("matrix")
    if isinstance(matrix, list):
        return len(matrix)
    root = data.get("root")
    if isinstance(root, list):
        return len(root)
    noise = data.get("noise")
    if isinstance(noise, dict):
        if isinstance(noise.get("dim"), int):
            return noise["dim"]
        cov = noise.get("cov")
        if isinstance(cov, list):
            return len(cov)
    return None


def _parse_problem(data: dict, path: str = "problem") -> ProblemSpec:
    if "kind" not in data:
        raise ConfigError(f"missing required key: {_dotted(path, 'kind')}")
    kind = _string(data["kind"], _dotted(path, "kind"))
    if kind == "cubic1d":
        _check_keys(data, path, ("kind", "a", "c", "root", "noise"))
        noise = None
        if "noise" in data:
            noise = _parse_noise(data["noise"], _dotted(path, "noise"), 1)
        return cubic_problem(
            a=_number(data.get("a", 1.0), _dotted(path, "a")),
            c=_number(data.get("c", 1.0), _dotted(path, "c")),
            root=_number(data.get("root", 0.0), _dotted(path, "root")),
            noise=noise)
    if kind not in ("linear", "tanh"):
        raise ConfigError(f"{_dotted(path, 'kind')} must be one of linear, "
                          f"tanh, cubic1d; got {kind!r}")
    _check_keys(data, path, ("kind", "dim", "matrix", "root", "noise",
                             "lyap_matrix", "b32_radius", "b32_beta0"))
    dim = _infer_dim(data, path) or 1
    matrix = data.get("matrix", 1.0)
    if isinstance(matrix, list):
        matrix = _matrix(matrix, _dotted(path, "matrix"))
    else:
        matrix = _number(matrix, _dotted(path, "matrix"))
    root = data.get("root")
    if root is not None:
        if isinstance(root, list):
            root = _vector(root, _dotted(path, "root"))
        else:
            root = np.full(dim, _number(root, _dotted(path, "root")))
    noise = None
    if "noise" in data:
        noise = _parse_noise(data["noise"], _dotted(path, "noise"), dim)
    kwargs = dict(matrix=matrix, dim=dim, root=root, noise=noise)
    if "lyap_matrix" in data:
        kwargs["lyap_matrix"] = _matrix(data["lyap_matrix"],
                                        _dotted(path, "lyap_matrix"))
    if "b32_radius" in data:
        kwargs["b32_radius"] = _number(data["b32_radius"],
                                       _dotted(path, "b32_radius"))
    if "b32_beta0" in data:
        kwargs["b32_beta0"] = _number(data["b32_beta0"],
                                      _dotted(path, "b32_beta0"))
    builder = linear_problem if kind == "linear" else tanh_problem
    return builder(**kwargs)


def _parse_sigmoid(data: dict, path: str = "sigmoid") -> SigmoidSpec:
    if "family" not in data:
        raise ConfigError(f"missing required key: {_dotted(path, 'family')}")
    family = _string(data["family"], _dotted(path, "family"))
    at_zero = _string(data.get("at_zero", "right"), _dotted(path, "at_zero"))
    if family == "constant":
        _check_keys(data, path, ("family", "c", "u_minus", "u_plus", "at_zero"))
        if "c" in data:
            c = _number(data["c"], _dotted(path, "c"))
        elif "u_plus" in data:
            c = _number(data["u_plus"], _dotted(path, "u_plus"))
            if "u_minus" in data and _number(
                    data["u_minus"], _dotted(path, "u_minus")) != c:
                raise ConfigError(
                    f"{path}: constant gate needs u_minus == u_plus")
        else:
            raise ConfigError(f"missing required key: {_dotted(path, 'c')}")
        return SigmoidSpec(family="constant", u_minus=c, u_plus=c,
                           at_zero=at_zero)
    if family == "kesten":
        _check_keys(data, path, ("family", "u_minus", "u_plus", "at_zero"))
        if "u_minus" in data and _number(
                data["u_minus"], _dotted(path, "u_minus")) != 0.0:
            raise ConfigError(f"{path}: kesten gate fixes u_minus = 0")
        return SigmoidSpec(
            family="kesten", u_minus=0.0,
            u_plus=_number(data.get("u_plus", 1.0), _dotted(path, "u_plus")),
            at_zero=at_zero)
    if family == "plakhov_almeida":
        _check_keys(data, path, ("family", "u_minus", "u_plus", "at_zero"))
        for key in ("u_minus", "u_plus"):
            if key not in data:
                raise ConfigError(f"missing required key: {_dotted(path, key)}")
        return SigmoidSpec(
            family="plakhov_almeida",
            u_minus=_number(data["u_minus"], _dotted(path, "u_minus")),
            u_plus=_number(data["u_plus"], _dotted(path, "u_plus")),
            at_zero=at_zero)
    if family == "smooth":
        _check_keys(data, path, ("family", "u_minus", "u_plus", "beta"))
        for key in ("u_minus", "u_plus", "beta"):
            if key not in data:
                raise ConfigError(f"missing required key: {_dotted(path, key)}")
        return SigmoidSpec(
            family="smooth",
            u_minus=_number(data["u_minus"], _dotted(path, "u_minus")),
            u_plus=_number(data["u_plus"], _dotted(path, "u_plus")),
            beta=_number(data["beta"], _dotted(path, "beta")))
    raise ConfigError(f"{_dotted(path, 'family')} must be one of constant, "
                      f"kesten, plakhov_almeida, smooth; got {family!r}")


def _parse_schedule(data: dict, path: str = "schedule") -> StepSchedule:
    family = _string(data.get("family", "reciprocal"), _dotted(path, "family"))
    if family == "reciprocal":
        _check_keys(data, path, ("family", "s_floor"))
        return StepSchedule(
            family="reciprocal",
            s_floor=_number(data.get("s_floor", 1.0), _dotted(path, "s_floor")))
    if family == "power":
        _check_keys(data, path, ("family", "gamma0", "p"))
        return StepSchedule(
            family="power",
            gamma0=_number(data.get("gamma0", 1.0), _dotted(path, "gamma0")),
            p=_number(data.get("p", 1.0), _dotted(path, "p")))
    if family == "constant":
        _check_keys(data, path, ("family", "gamma0"))
        return StepSchedule(
            family="constant",
            gamma0=_number(data.get("gamma0", 1.0), _dotted(path, "gamma0")))
    raise ConfigError(f"{_dotted(path, 'family')} must be one of reciprocal, "
                      f"power, constant; got {family!r}")


def _parse_init(data: dict, problem: ProblemSpec,
                path: str = "init") -> InitialConditions:
    _check_keys(data, path, ("x0", "s0", "s1"))
    x0 = data.get("x0")
    if x0 is None:
        x0 = problem.root + 1.0
    elif isinstance(x0, list):
        x0 = _vector(x0, _dotted(path, "x0"))
    else:
        x0 = np.full(problem.dim, _number(x0, _dotted(path, "x0")))
    return InitialConditions(
        x0=x0,
        s0=_number(data.get("s0", 1.0), _dotted(path, "s0")),
        s1=_number(data.get("s1", 1.0), _dotted(path, "s1")))


@dataclass(frozen=True, eq=False)
class RunConfig:
    plan: ExperimentPlan
    cov_tol: float = DEFAULT_COV_TOL
    ks_scale: float = DEFAULT_KS_SCALE
    max_diverged_fraction: float = DEFAULT_MAX_DIVERGED_FRACTION
    normality_min_replicates: int = NORMALITY_MIN_REPLICATES
    out_dir: str = "."
    emit_trajectory: bool = True
    emit_summary: bool = True
    emit_prediction: bool = True


def parse_config(data: dict) -> RunConfig:
    _check_keys(data, "", ("problem", "sigmoid", "schedule", "init",
                           "experiment", "tolerances", "output"))
    for key in ("problem", "sigmoid", "schedule"):
        if key not in data:
            raise ConfigError(f"missing required key: {key}")
    problem = _parse_problem(data["problem"])
    sigmoid = _parse_sigmoid(data["sigmoid"])
    schedule = _parse_schedule(data["schedule"])
    init = _parse_init(data.get("init", {}), problem)

    exp = data.get("experiment", {})
    _check_keys(exp, "experiment", ("horizon", "n_replicates", "master_seed",
                                    "checkpoints", "couple_comparator",
                                    "comparator_noise", "divergence_bound",
                                    "e0_mc_samples"))
    horizon = _integer(exp.get("horizon", 10_000), "experiment.horizon")
    checkpoints = exp.get("checkpoints")
    if checkpoints is not None:
        if not isinstance(checkpoints, list):
            raise ConfigError("experiment.checkpoints must be a list")
        checkpoints = tuple(
            _integer(t, f"experiment.checkpoints[{i}]")
            for i, t in enumerate(checkpoints))
    else:
        checkpoints = default_checkpoints(horizon)
    plan = ExperimentPlan(
        problem=problem, schedule=schedule, sigmoid=sigmoid, init=init,
        horizon=horizon,
        n_replicates=_integer(exp.get("n_replicates", 100),
                              "experiment.n_replicates"),
        master_seed=_integer(exp.get("master_seed", 0),
                             "experiment.master_seed"),
        checkpoints=checkpoints,
        couple_comparator=_boolean(exp.get("couple_comparator", False),
                                   "experiment.couple_comparator"),
        comparator_noise=_string(exp.get("comparator_noise", "shared"),
                                 "experiment.comparator_noise"),
        divergence_bound=_number(exp.get("divergence_bound", 1e12),
                                 "experiment.divergence_bound"),
        e0_mc_samples=_integer(exp.get("e0_mc_samples", 1_000_000),
                               "experiment.e0_mc_samples"))

    tol = data.get("tolerances", {})
    _check_keys(tol, "tolerances", ("cov_tol", "ks_scale",
                                    "max_diverged_fraction",
                                    "normality_min_replicates"))
    out = data.get("output", {})
    _check_keys(out, "output", ("dir", "trajectory", "summary", "prediction"))
    return RunConfig(
        plan=plan,
        cov_tol=_number(tol.get("cov_tol", DEFAULT_COV_TOL),
                        "tolerances.cov_tol"),
        ks_scale=_number(tol.get("ks_scale", DEFAULT_KS_SCALE),
                         "tolerances.ks_scale"),
        max_diverged_fraction=_number(
            tol.get("max_diverged_fraction", DEFAULT_MAX_DIVERGED_FRACTION),
            "tolerances.max_diverged_fraction"),
        normality_min_replicates=_integer(
            tol.get("normality_min_replicates", NORMALITY_MIN_REPLICATES),
            "tolerances.normality_min_replicates"),
        out_dir=_string(out.get("dir", "."), "output.dir"),
        emit_trajectory=_boolean(out.get("trajectory", True),
                                 "output.trajectory"),
        emit_summary=_boolean(out.get("summary", True), "output.summary"),
        emit_prediction=_boolean(out.get("prediction", True),
                                 "output.prediction"))


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError(f"duplicate key in config: {key}")
        seen[key] = value
    return seen


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data)


def _noise_dict(noise: NoiseModel) -> dict:
    out: dict = {"kind": noise.kind, "dim": noise.dim}
    if noise.kind == "gaussian":
        out["cov"] = noise.cov.tolist()
    elif noise.kind == "uniform_ball":
        out["radius"] = noise.radius
    else:
        out["scale"] = noise.scale
    return out


def canonical_config(cfg: RunConfig) -> dict:
    """Fully resolved configuration with every default made explicit."""
    plan = cfg.plan
    problem = plan.problem
    prob: dict = {"kind": problem.kind, "dim": problem.dim}
    if problem.kind == "cubic1d":
        prob["a"] = problem.cubic_a
        prob["c"] = problem.cubic_c
        prob["root"] = float(problem.root[0])
    else:
        prob["matrix"] = problem.matrix.tolist()
        prob["root"] = problem.root.tolist()
    prob["noise"] = _noise_dict(problem.noise)
    if problem.kind != "cubic1d":
        prob["lyap_matrix"] = problem.lyap_matrix.tolist()
        if problem.b32_radius is not None:
            prob["b32_radius"] = problem.b32_radius
            prob["b32_beta0"] = problem.b32_beta0

    sigmoid = plan.sigmoid
    sig: dict = {"family": sigmoid.family, "u_minus": sigmoid.u_minus,
                 "u_plus": sigmoid.u_plus}
    if sigmoid.family == "smooth":
        sig["beta"] = sigmoid.beta
    else:
        sig["at_zero"] = sigmoid.at_zero

    schedule = plan.schedule
    if schedule.family == "reciprocal":
        sched = {"family": "reciprocal", "s_floor": schedule.s_floor}
    elif schedule.family == "power":
        sched = {"family": "power", "gamma0": schedule.gamma0,
                 "p": schedule.p}
    else:
        sched = {"family": "constant", "gamma0": schedule.gamma0}

    return {
        "problem": prob,
        "sigmoid": sig,
        "schedule": sched,
        "init": {"x0": plan.init.x0.tolist(), "s0": plan.init.s0,
                 "s1": plan.init.s1},
        "experiment": {
            "horizon": plan.horizon,
            "n_replicates": plan.n_replicates,
            "master_seed": plan.master_seed,
            "checkpoints": list(plan.checkpoints),
            "couple_comparator": plan.couple_comparator,
            "comparator_noise": plan.comparator_noise,
            "divergence_bound": plan.divergence_bound,
            "e0_mc_samples": plan.e0_mc_samples,
        },
        "tolerances": {
            "cov_tol": cfg.cov_tol,
            "ks_scale": cfg.ks_scale,
            "max_diverged_fraction": cfg.max_diverged_fraction,
            "normality_min_replicates": cfg.normality_min_replicates,
        },
        "output": {
            "dir": cfg.out_dir,
            "trajectory": cfg.emit_trajectory,
            "summary": cfg.emit_summary,
            "prediction": cfg.emit_prediction,
        },
    }
