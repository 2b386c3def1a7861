"""Noise models driving the stochastic iteration.

Three families, all mean zero and symmetric under sign flip:

* ``gaussian`` -- N(0, cov) for any symmetric PSD ``cov`` (a zero matrix
  gives deterministic zero noise, handy in tests);
* ``uniform_ball`` -- uniform on the solid ball of a given radius, with
  covariance radius^2 / (dim + 2) * I;
* ``scaled_rademacher`` -- independent +/-scale components. Its support is
  discrete, so it does not put mass on balls around the origin; it is
  flagged non-conforming and meant for unit tests only.

``sample_block`` is the one sampling entry point. Engine code always draws
noise in blocks with a fixed size (see ``adaptix.core.NOISE_CHUNK``): for
the ball model a block draws all its normals first and the radius uniforms
second, so the stream layout depends on the block size, which is why that
size is a frozen constant rather than a knob.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._rowops import norm_rows
from .errors import ConfigError, DimensionMismatchError

KINDS = ("gaussian", "uniform_ball", "scaled_rademacher")


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: str
    dim: int
    cov: np.ndarray          # target covariance, always a (dim, dim) matrix
    radius: float | None = None  # uniform_ball only
    scale: float | None = None   # scaled_rademacher only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigError(f"noise dim must be >= 1, got {self.dim}")
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"cov shape {cov.shape} does not match dim {self.dim}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ConfigError("noise covariance must be symmetric")
        object.__setattr__(self, "cov", cov)
        if self.kind == "gaussian":
            self._gaussian_factor  # PSD check at construction, not first draw

    @cached_property
    def _gaussian_factor(self) -> np.ndarray:
        """Lower-triangular-ish factor F with F F^T = cov.

        Cholesky when the covariance is positive definite; an eigh-based
        square root for merely PSD matrices (including the zero matrix).
        """
        if not self.cov.any():
            return np.zeros_like(self.cov)
        try:
            return np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh(self.cov)
            if vals.min() < -1e-10 * max(1.0, vals.max()):
                raise ConfigError("gaussian covariance is not PSD") from None
            return vecs * np.sqrt(np.clip(vals, 0.0, None))

    @property
    def is_continuous(self) -> bool:
        """Whether the law has a density on R^dim."""
        if self.kind == "gaussian":
            return bool(np.linalg.matrix_rank(self.cov) == self.dim)
        if self.kind == "uniform_ball":
            return self.radius > 0
        return False

    @property
    def is_sign_symmetric(self) -> bool:
        """xi and -xi share the same law (true for every built-in kind)."""
        return True

    @property
    def conforming(self) -> bool:
        """Positive probability on every ball around the origin."""
        return self.kind != "scaled_rademacher"

    def sample_block(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` noise vectors as a (count, dim) block."""
        n = self.dim
        if self.kind == "gaussian":
            z = rng.standard_normal((count, n))
            f = self._gaussian_factor
            # Row-local affine map; see _rowops for why not a matmul.
            out = np.zeros_like(z)
            for j in range(n):
                out += z[:, j, None] * f[:, j]
            return out
        if self.kind == "uniform_ball":
            g = rng.standard_normal((count, n))
            r = rng.random(count)
            nrm = norm_rows(g)
            nrm = np.where(nrm == 0.0, 1.0, nrm)
            return g * (self.radius * r ** (1.0 / n) / nrm)[:, None]
        signs = 2.0 * rng.integers(0, 2, size=(count, n)) - 1.0
        return self.scale * signs

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draw a single noise vector (a block of one)."""
        return self.sample_block(rng, 1)[0]


def gaussian_noise(cov) -> NoiseModel:
    """Gaussian model from a scalar variance, diagonal, or full matrix."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise DimensionMismatchError(f"covariance must be square, got {cov.shape}")
    if np.any(np.diag(cov) < 0):
        raise ConfigError("covariance diagonal must be nonnegative")
    return NoiseModel(kind="gaussian", dim=cov.shape[0], cov=cov)


def uniform_ball_noise(dim: int, radius: float) -> NoiseModel:
    if radius <= 0:
        raise ConfigError(f"ball radius must be > 0, got {radius}")
    cov = radius**2 / (dim + 2) * np.eye(dim)
    return NoiseModel(kind="uniform_ball", dim=dim, cov=cov, radius=float(radius))


def scaled_rademacher_noise(dim: int, scale: float) -> NoiseModel:
    if scale <= 0:
        raise ConfigError(f"rademacher scale must be > 0, got {scale}")
    cov = scale**2 * np.eye(dim)
    return NoiseModel(kind="scaled_rademacher", dim=dim, cov=cov, scale=float(scale))
