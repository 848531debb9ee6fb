"""Mixed matrix norms and the covariance-weighted (Mahalanobis) norm.

Every norm here is a nested power mean without the normalisation:
an inner exponent aggregates the entries of one vector, an outer exponent
aggregates those lengths across rows or segments. Entries always enter as
magnitudes, so fractional and odd exponents are well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateSegmentError,
    DimensionMismatchError,
    MvFractalError,
    NonFiniteError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

# exponent magnitude above which power sums switch to log-domain accumulation
LOG_DOMAIN_THRESHOLD = 50.0


@dataclass(frozen=True)
class NormOrder:
    p: float = 2.0
    q: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        if self.p == 0 or self.q == 0:
            raise ZeroDivisionError("p and q must be nonzero; use the log-mean branch for q = 0")
        if self.r < 1 and not math.isinf(self.r):
            raise MvFractalError(f"r must be >= 1, got {self.r}")

    @property
    def is_true_norm(self) -> bool:
        return self.p >= 1 and self.q >= 1


def power_sum_root(v: np.ndarray, e: float, axis: int = -1) -> np.ndarray:
    """``(sum v**e) ** (1/e)`` along ``axis`` for nonnegative ``v``.

    ``e = inf`` gives the maximum. Negative ``e`` requires strictly positive
    entries; a zero raises :class:`DegenerateSegmentError`.
    """
    if math.isinf(e):
        return v.max(axis=axis) if e > 0 else v.min(axis=axis)
    if e < 0 and np.any(v == 0):
        raise DegenerateSegmentError("zero entry under a negative exponent")
    if abs(e) <= LOG_DOMAIN_THRESHOLD:
        return np.sum(v**e, axis=axis) ** (1.0 / e)
    with np.errstate(divide="ignore"):
        logv = np.log(v)
    return np.exp(logsumexp(e * logv, axis=axis) / e)


def _check_finite(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    bad = ~np.isfinite(z)
    if bad.any():
        raise NonFiniteError(tuple(int(i) for i in np.argwhere(bad)[0]))
    return z


def _outer(lengths: np.ndarray, order: NormOrder) -> float:
    """Inner p over axis 1, outer q over axis 0."""
    rows = power_sum_root(lengths, order.p, axis=1)
    return float(power_sum_root(rows, order.q, axis=0))


def lpq_norm(z, order: NormOrder) -> float:
    """L_pq norm of an ``(N, M)`` matrix: p over columns within a row, q over rows."""
    z = _check_finite(z)
    if z.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D matrix, got shape {z.shape}")
    return _outer(np.abs(z), order)


def lpqr_norm(z, order: NormOrder) -> float:
    """Three-level norm of a ``(U, V, M)`` array: r over the last axis, then p, then q."""
    z = _check_finite(z)
    if z.ndim != 3:
        raise DimensionMismatchError(f"expected a 3-D array, got shape {z.shape}")
    lengths = power_sum_root(np.abs(z), order.r, axis=2)
    return _outer(lengths, order)


def lpq_euclid_norm(z, order: NormOrder) -> float:
    """L_pq norm of the Euclidean lengths of the vectors ``z[u, v, :]``."""
    z = _check_finite(z)
    if z.ndim != 3:
        raise DimensionMismatchError(f"expected a 3-D array, got shape {z.shape}")
    lengths = np.sqrt(np.einsum("uvm,uvm->uv", z, z))
    return _outer(lengths, order)


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive-definite matrix with its spectral factors.

    ``sigma = eigenvectors.T @ diag(eigenvalues) @ eigenvectors``; rows of
    ``eigenvectors`` are the eigenvectors. ``factor`` satisfies
    ``factor.T @ factor == sigma`` and ``whitener`` satisfies
    ``whitener.T @ whitener == inv(sigma)``.
    """

    sigma: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    factor: np.ndarray
    whitener: np.ndarray
    shrinkage: float = 0.0

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def whiten(self, z: np.ndarray) -> np.ndarray:
        """Apply the whitener to vectors stored along the last axis."""
        return np.asarray(z) @ self.whitener.T

    def mahalanobis(self, z: np.ndarray) -> np.ndarray:
        w = self.whiten(z)
        return np.sqrt(np.sum(w * w, axis=-1))

    @classmethod
    def identity(cls, m: int) -> "SpdMatrix":
        eye = np.eye(m)
        return cls(eye, np.ones(m), eye.copy(), eye.copy(), eye.copy(), 0.0)


def spd_factorize(sigma, shrinkage: float = 0.0, symmetry_tol: float = 1e-12) -> SpdMatrix:
    """Eigen-factorize a covariance, optionally shrunk toward a scaled identity.

    The shrunk matrix is ``(1 - shrinkage) * sigma + shrinkage * tr(sigma)/M * I``.
    An indefinite or singular matrix raises rather than being repaired.
    """
    s = np.array(sigma, dtype=np.float64)
    if s.ndim == 0:
        s = s.reshape(1, 1)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatchError(f"covariance must be square, got shape {s.shape}")
    _check_finite(s)
    if not 0.0 <= shrinkage < 1.0:
        raise MvFractalError(f"shrinkage must lie in [0, 1), got {shrinkage}")
    scale = np.abs(s).max()
    if np.abs(s - s.T).max() > symmetry_tol * max(scale, np.finfo(float).tiny):
        raise NotSymmetricError("covariance is not symmetric")
    s = 0.5 * (s + s.T)
    m = s.shape[0]
    if shrinkage > 0:
        s = (1.0 - shrinkage) * s + shrinkage * np.trace(s) / m * np.eye(m)
    lam, vecs = np.linalg.eigh(s)
    floor = m * np.finfo(float).eps * max(lam.max(), 0.0)
    if lam.min() <= floor:
        raise NotPositiveDefiniteError(float(lam.min()))
    q = vecs.T
    root = np.sqrt(lam)
    for a in (s, lam, q):
        a.setflags(write=False)
    factor = root[:, None] * q
    whitener = q / root[:, None]
    factor.setflags(write=False)
    whitener.setflags(write=False)
    return SpdMatrix(s, lam, q, factor, whitener, float(shrinkage))


def mahalanobis_lpq_norm(z, cov: SpdMatrix, order: NormOrder) -> float:
    """Covariance-weighted L_pq norm of a ``(U, V, M)`` array.

    Each vector is whitened and then measured with the Euclidean length, so
    ``sqrt(z' inv(sigma) z)`` is never formed with an explicit inverse.
    """
    z = _check_finite(z)
    if z.ndim != 3:
        raise DimensionMismatchError(f"expected a 3-D array, got shape {z.shape}")
    if z.shape[2] != cov.dim:
        raise DimensionMismatchError(f"data has {z.shape[2]} channels, covariance is {cov.dim}x{cov.dim}")
    return lpq_euclid_norm(cov.whiten(z), order)
