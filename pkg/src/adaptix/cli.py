"""Command-line harness.

Subcommands:

* ``predict``   -- asymptotic covariance prediction from the config alone.
* ``run``       -- one trajectory, written step by step to trajectory.csv.
* ``replicate`` -- a replicate ensemble with per-checkpoint statistics.
* ``validate``  -- assumption checks for the configured problem/schedule/gate.

Exit codes: 0 success; 2 bad configuration; 3 assumption or stability
failure; 4 statistical failure (divergence or a failed normality gate);
5 numeric failure (ill-conditioned solve, tail bound, non-finite values).

Every command echoes the fully resolved configuration to config.json in
the output directory, so a run can be replayed from its artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .asymptotics import covariance_integral_oracle, predict
from .config import RunConfig, canonical_config, load_config
from .core import Trajectory, run_trajectory
from .errors import (AdaptixError, ConfigError, DimensionMismatchError,
                     DivergedTrajectoryError, NonFiniteMeasurementError,
                     NumericError, StabilityError, TailBoundError)
from .montecarlo import (convergence_summary, coupling_gap, normality_check,
                         normality_stats, resolve_e0, run_replicates,
                         step_counter_drift)
from .problems import validate_problem
from .schedules import gamma_eval
from .serialize import write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_STATISTICAL = 4
EXIT_NUMERIC = 5

WORKERS_ENV = "ADAPTIX_WORKERS"

CHECKPOINT_HEADER = ["t", "quantile_50", "quantile_90", "quantile_99",
                     "s_over_t_mean", "s_over_t_sd", "cov_rel_err",
                     "mahalanobis_ks"]


def _resolve_workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(
                f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1


def _load(args):
    """Parse the config, apply overrides, echo the effective document.

    ``--seed`` replaces the config seed before the echo, so config.json
    always describes the run that happened.  ``--out`` only redirects
    where artifacts land; like ``--workers`` it is an execution detail
    and is deliberately not echoed, keeping artifacts byte-identical no
    matter where they are written.
    """
    cfg = load_config(args.config)
    if args.seed is not None:
        plan = dataclasses.replace(cfg.plan, master_seed=args.seed)
        cfg = dataclasses.replace(cfg, plan=plan)
    out_dir = args.out if args.out is not None else cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "config.json"), canonical_config(cfg))
    return cfg, out_dir


def _prediction_dict(prediction, oracle_diff: float | None) -> dict:
    out = {
        "e0": prediction.e0.value,
        "e0_stderr": prediction.e0.stderr,
        "W": prediction.w.tolist(),
    }
    if prediction.stable:
        out["V"] = prediction.v.tolist()
    out["stable"] = prediction.stable
    out["eigen_real_parts"] = prediction.eigen_real_parts.tolist()
    if prediction.stable:
        out["oracle_max_abs_diff"] = oracle_diff
    return out


def _predict_with_artifact(cfg: RunConfig, out_dir: str):
    plan = cfg.plan
    e0 = resolve_e0(plan)
    prediction = predict(plan.problem.jacobian_at_root,
                         plan.problem.noise.cov, e0)
    oracle_diff = None
    if prediction.stable:
        oracle = covariance_integral_oracle(prediction.w,
                                            plan.problem.noise.cov, e0.value)
        oracle_diff = float(np.max(np.abs(prediction.v - oracle)))
    if cfg.emit_prediction:
        write_json(os.path.join(out_dir, "prediction.json"),
                   _prediction_dict(prediction, oracle_diff))
    return prediction


def cmd_predict(args) -> int:
    cfg, out_dir = _load(args)
    prediction = _predict_with_artifact(cfg, out_dir)
    if not prediction.stable:
        print("adaptix: W = I/2 - J/E0 is not stable; no limit covariance",
              file=sys.stderr)
        return EXIT_ASSUMPTION
    return EXIT_OK


def _trajectory_stride(horizon: int) -> int:
    return max(1, horizon // 10_000)


def _write_trajectory(path, trajectory: Trajectory, schedule) -> None:
    dim = trajectory.states[0].x.shape[0]
    header = ["t", "s", "gamma"] + [f"x_{i}" for i in range(dim)]
    rows = []
    for state in trajectory.states:
        rows.append([state.t, state.s,
                     float(gamma_eval(schedule, state.s))] + list(state.x))
    write_csv(path, header, rows)


def cmd_run(args) -> int:
    cfg, out_dir = _load(args)
    plan = cfg.plan
    stride = _trajectory_stride(plan.horizon)
    try:
        trajectory = run_trajectory(
            plan.problem, plan.init, plan.schedule, plan.sigmoid,
            plan.horizon, plan.master_seed, record_stride=stride,
            divergence_bound=plan.divergence_bound)
    except DivergedTrajectoryError as exc:
        if cfg.emit_trajectory and exc.trajectory is not None:
            _write_trajectory(os.path.join(out_dir, "trajectory.csv"),
                              exc.trajectory, plan.schedule)
        if cfg.emit_summary:
            write_json(os.path.join(out_dir, "summary.json"), {
                "command": "run",
                "seed": plan.master_seed,
                "horizon": plan.horizon,
                "diverged": True,
                "diverged_at": exc.t,
                "exit_code": EXIT_STATISTICAL,
            })
        print(f"adaptix: trajectory diverged at t={exc.t}", file=sys.stderr)
        return EXIT_STATISTICAL
    if cfg.emit_trajectory:
        _write_trajectory(os.path.join(out_dir, "trajectory.csv"),
                          trajectory, plan.schedule)
    final = trajectory.final
    err = float(np.linalg.norm(final.x - plan.problem.root))
    if cfg.emit_summary:
        write_json(os.path.join(out_dir, "summary.json"), {
            "command": "run",
            "seed": plan.master_seed,
            "horizon": plan.horizon,
            "diverged": False,
            "final_error_norm": err,
            "final_s": final.s,
            "final_s_over_t": final.s / final.t if final.t else 0.0,
            "exit_code": EXIT_OK,
        })
    return EXIT_OK


def cmd_replicate(args) -> int:
    cfg, out_dir = _load(args)
    plan = cfg.plan
    workers = _resolve_workers(args)
    prediction = _predict_with_artifact(cfg, out_dir)
    if not prediction.stable:
        print("adaptix: W = I/2 - J/E0 is not stable; refusing to test "
              "normality against a nonexistent limit", file=sys.stderr)
        return EXIT_ASSUMPTION

    rset = run_replicates(plan, workers=workers)
    summary: dict = {
        "command": "replicate",
        "master_seed": plan.master_seed,
        "n_replicates": rset.n_replicates,
        "n_diverged": int(rset.diverged.sum()),
        "diverged_fraction": rset.diverged_fraction,
        "e0": rset.e0.value,
        "e0_stderr": rset.e0.stderr,
        "e0_method": rset.e0.method,
    }
    alive = int((~rset.diverged).sum())
    if alive < 2:
        summary["exit_code"] = EXIT_STATISTICAL
        if cfg.emit_summary:
            write_json(os.path.join(out_dir, "summary.json"), summary)
        print(f"adaptix: {summary['n_diverged']} of {rset.n_replicates} "
              "replicates diverged; too few survivors for statistics",
              file=sys.stderr)
        return EXIT_STATISTICAL

    conv = convergence_summary(rset)
    quantiles = conv.rows
    drift = step_counter_drift(rset)
    ok = ~rset.diverged
    root = plan.problem.root
    rows = []
    for i, t in enumerate(rset.ts):
        scaled = np.sqrt(float(t)) * (rset.x[i][ok] - root)
        _, rel_err, ks = normality_stats(scaled, prediction.v)
        rows.append([int(t),
                     quantiles[i]["quantile_50"], quantiles[i]["quantile_90"],
                     quantiles[i]["quantile_99"], drift[i]["s_over_t_mean"],
                     drift[i]["s_over_t_sd"], rel_err, ks])
    if cfg.emit_summary:
        write_csv(os.path.join(out_dir, "checkpoints.csv"),
                  CHECKPOINT_HEADER, rows)

    report = normality_check(rset, prediction, cov_tol=cfg.cov_tol,
                             ks_scale=cfg.ks_scale)
    gate_applied = rset.n_replicates >= cfg.normality_min_replicates
    summary["final_checkpoint"] = report.t
    summary["error_trend_decreasing"] = conv.decreasing
    summary["normality"] = {
        "t": report.t,
        "n_used": report.n_used,
        "cov_rel_err": report.cov_rel_err,
        "mahalanobis_ks": report.mahalanobis_ks,
        "ks_band": report.ks_band,
        "cov_tol": report.cov_tol,
        "passed": report.passed,
    }
    summary["normality_gate_applied"] = gate_applied
    if plan.couple_comparator:
        coupling = coupling_gap(rset)
        summary["coupling"] = {
            "rows": coupling.rows,
            "drop_factor": coupling.drop_factor,
            "decreasing": coupling.decreasing,
        }

    code = EXIT_OK
    if rset.diverged_fraction > cfg.max_diverged_fraction:
        code = EXIT_STATISTICAL
    elif gate_applied and not report.passed:
        code = EXIT_STATISTICAL
    summary["exit_code"] = code
    if cfg.emit_summary:
        write_json(os.path.join(out_dir, "summary.json"), summary)
    if code != EXIT_OK:
        if rset.diverged_fraction > cfg.max_diverged_fraction:
            print(f"adaptix: diverged fraction {rset.diverged_fraction:.4f} "
                  f"exceeds {cfg.max_diverged_fraction}", file=sys.stderr)
        else:
            print("adaptix: normality gate failed at "
                  f"t={report.t}: cov_rel_err={report.cov_rel_err:.4f} "
                  f"(tol {report.cov_tol}), ks={report.mahalanobis_ks:.4f} "
                  f"(band {report.ks_band:.4f})", file=sys.stderr)
    return code


def _witness_jsonable(witness):
    if witness is None:
        return None
    out = {}
    for key, value in witness.items():
        if isinstance(value, np.ndarray):
            out[key] = value.tolist()
        elif isinstance(value, (np.floating, float)):
            out[key] = float(value)
        elif isinstance(value, (np.integer, int)):
            out[key] = int(value)
        else:
            out[key] = value
    return out


def cmd_validate(args) -> int:
    cfg, out_dir = _load(args)
    plan = cfg.plan
    report = validate_problem(plan.problem, plan.schedule, plan.sigmoid,
                              seed=plan.master_seed)
    items = []
    for item in report:
        entry = {"check_id": item.check_id, "verdict": item.verdict,
                 "detail": item.detail}
        witness = _witness_jsonable(item.witness)
        if witness is not None:
            entry["witness"] = witness
        items.append(entry)
    write_json(os.path.join(out_dir, "validation.json"), {
        "problem": plan.problem.name,
        "all_pass": report.all_pass,
        "failed": sorted(report.failed_ids),
        "items": items,
    })
    if not report.all_pass:
        print("adaptix: assumption check(s) failed: "
              + ", ".join(sorted(report.failed_ids)), file=sys.stderr)
        return EXIT_ASSUMPTION
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptix",
        description="Stochastic approximation with an adaptive step counter: "
                    "predictions, simulations, and assumption checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = [
        ("predict", cmd_predict,
         "compute E0, W, and the limit covariance V"),
        ("run", cmd_run, "simulate one trajectory"),
        ("replicate", cmd_replicate,
         "simulate a replicate ensemble and test the limit law"),
        ("validate", cmd_validate, "run the assumption checklist"),
    ]
    for name, func, help_text in commands:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True,
                         help="path to a JSON run configuration")
        cmd.add_argument("--out", default=None,
                         help="directory for artifacts (default: output.dir "
                              "from the config, else .)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override experiment.master_seed")
        cmd.add_argument("--workers", type=int, default=None,
                         help=f"worker processes (default: ${WORKERS_ENV} "
                              "or 1); results do not depend on this")
        cmd.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionMismatchError) as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except DivergedTrajectoryError as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except (NumericError, TailBoundError, NonFiniteMeasurementError) as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AdaptixError as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"adaptix: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
