"""Asymptotic covariance predictions for the scaled iterate sqrt(t) (x_t - x*).

With the counter growing like E0 * t, the effective drift around the root is
governed by

    W = I/2 - (1/E0) phi'(x*),

and when W is stable (all eigenvalue real parts < 0) the scaled iterate is
asymptotically normal with covariance V solving

    W (-V) + (-V) W^T = (1/E0)^2 S_xi.

Two independent routes to V are kept deliberately separate:

* :func:`solve_lyapunov` vectorises the equation through the Kronecker sum
  (kron(W, I) + kron(I, W)) and solves the dense n^2 x n^2 system;
* :func:`covariance_integral_oracle` evaluates the stable-matrix integral
  representation -(-V) = integral_0^inf e^{Wt} (1/E0)^2 S_xi e^{W^T t} dt
  by composite Gauss-Legendre quadrature with a checked tail bound.

They share no linear-algebra path, so agreement is a real cross-check.

Closed forms used in tests: scalar V = sigma^2 / (E0 (2a - E0)); for
diagonal W, V_ij = C_ij / (-w_i - w_j) with C = S_xi / E0^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import NumericError, StabilityError, TailBoundError
from .schedules import E0Estimate

#: Residual tolerance for the Lyapunov solve, relative to max(1, |C|_max).
LYAPUNOV_RESIDUAL_RTOL = 1e-10

#: The quadrature horizon must damp the propagator to this spectral norm.
TAIL_NORM_BOUND = 1e-8


def _as_e0_value(e0) -> float:
    value = e0.value if isinstance(e0, E0Estimate) else float(e0)
    if value <= 0:
        raise ValueError(f"E0 must be > 0, got {value}")
    return float(value)


def stability_matrix(jacobian: np.ndarray, e0) -> tuple[np.ndarray, np.ndarray, bool]:
    """Drift matrix W = I/2 - jacobian/E0 with its spectrum.

    Returns ``(W, eigen_real_parts, stable)`` where the real parts come
    sorted ascending and ``stable`` means all of them are < 0.
    """
    j = np.atleast_2d(np.asarray(jacobian, dtype=np.float64))
    if j.shape[0] != j.shape[1]:
        raise ValueError(f"jacobian must be square, got {j.shape}")
    value = _as_e0_value(e0)
    w = 0.5 * np.eye(j.shape[0]) - j / value
    real_parts = np.sort(_eig_real_parts(w))
    return w, real_parts, bool(real_parts[-1] < 0.0)


def _eig_real_parts(w: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(w).real
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue solver failed: {exc}") from exc


def _require_stable(w: np.ndarray) -> np.ndarray:
    real_parts = np.sort(_eig_real_parts(w))
    if real_parts[-1] >= 0.0:
        raise StabilityError(
            f"matrix is not stable: max eigenvalue real part = {real_parts[-1]:.6g}")
    return real_parts


def solve_lyapunov(w: np.ndarray, noise_cov: np.ndarray, e0) -> np.ndarray:
    """Asymptotic covariance V from the Kronecker-vectorised Lyapunov solve.

    Solves (kron(W, I) + kron(I, W)) vec(-V) = vec(S_xi / E0^2), negates,
    and symmetrises. Raises StabilityError for unstable W and NumericError
    if the residual of the returned V exceeds the documented bound.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    _require_stable(w)
    n = w.shape[0]
    value = _as_e0_value(e0)
    c = np.atleast_2d(np.asarray(noise_cov, dtype=np.float64)) / (value * value)
    if c.shape != (n, n):
        raise ValueError(f"noise covariance shape {c.shape} does not match W {w.shape}")
    eye = np.eye(n)
    system = np.kron(w, eye) + np.kron(eye, w)
    try:
        minus_v = np.linalg.solve(system, c.reshape(-1)).reshape(n, n)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Lyapunov system is singular: {exc}") from exc
    v = -minus_v
    v = 0.5 * (v + v.T)
    residual = np.max(np.abs(w @ (-v) + (-v) @ w.T - c))
    tol = LYAPUNOV_RESIDUAL_RTOL * max(1.0, float(np.max(np.abs(c))))
    if residual > tol:
        raise NumericError(
            f"Lyapunov residual {residual:.3e} exceeds tolerance {tol:.3e}")
    return v


def covariance_integral_oracle(w: np.ndarray, noise_cov: np.ndarray, e0,
                               t_max: float | None = None,
                               n_nodes: int = 384) -> np.ndarray:
    """V via quadrature of the integral representation (independent route).

    Integrates e^{Wt} (S_xi/E0^2) e^{W^T t} over [0, t_max] with composite
    Gauss-Legendre panels (12 nodes each). Panel width is capped at
    2/||W||_2 so oscillatory modes (complex spectrum) are resolved;
    ``n_nodes`` is a floor on the total node count. ``t_max=None`` picks
    log(1e12)/|max real eigenvalue|, then the tail requirement
    ||e^{W t_max}||_2 <= 1e-8 is verified either way; a violation raises
    TailBoundError asking for a larger t_max.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    real_parts = _require_stable(w)
    value = _as_e0_value(e0)
    c = np.atleast_2d(np.asarray(noise_cov, dtype=np.float64)) / (value * value)
    if t_max is None:
        t_max = float(np.log(1e12) / -real_parts[-1])
    tail = np.linalg.norm(expm(w * t_max), 2)
    if tail > TAIL_NORM_BOUND:
        raise TailBoundError(
            f"||exp(W t_max)|| = {tail:.3e} > {TAIL_NORM_BOUND:.0e} at "
            f"t_max = {t_max:.6g}; increase t_max")
    per_panel = 12
    spread = max(1.0, float(np.linalg.norm(w, 2)))
    n_panels = max(1, int(np.ceil(n_nodes / per_panel)),
                   int(np.ceil(t_max * spread / 2.0)))
    nodes, weights = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(0.0, t_max, n_panels + 1)
    acc = np.zeros_like(c)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for node, weight in zip(nodes, weights):
            propagator = expm(w * (mid + half * node))
            acc += (half * weight) * (propagator @ c @ propagator.T)
    return 0.5 * (acc + acc.T)


@dataclass(frozen=True, eq=False)
class AsymptoticPrediction:
    """E0, the drift matrix, its spectrum, and (when stable) V."""
    e0: E0Estimate
    w: np.ndarray
    eigen_real_parts: np.ndarray
    stable: bool
    v: np.ndarray | None
    noise_cov: np.ndarray


def predict(jacobian: np.ndarray, noise_cov: np.ndarray, e0) -> AsymptoticPrediction:
    """Bundle W, the stability verdict, and (if stable) the solved V."""
    estimate = e0 if isinstance(e0, E0Estimate) else E0Estimate(
        value=float(e0), stderr=0.0, method="exact")
    w, real_parts, stable = stability_matrix(jacobian, estimate)
    cov = np.atleast_2d(np.asarray(noise_cov, dtype=np.float64))
    v = solve_lyapunov(w, cov, estimate) if stable else None
    return AsymptoticPrediction(e0=estimate, w=w, eigen_real_parts=real_parts,
                                stable=stable, v=v, noise_cov=cov)
