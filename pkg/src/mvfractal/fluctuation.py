"""Profile, mirrored segmentation, polynomial detrending and q-order fluctuation functions.

Three variants share one code path: the univariate function, the Euclidean
multichannel function (residual energy summed over channels) and the
covariance-weighted function, where each residual vector is measured by its
Mahalanobis length before averaging.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

from .errors import (
    DegenerateSegmentError,
    DimensionMismatchError,
    InsufficientSamplesError,
    MultichannelInputError,
    MvFractalError,
    NotPositiveDefiniteError,
    RankDeficientFitError,
    ScaleTooLargeError,
)
from .norms import SpdMatrix, spd_factorize
from .signals import MultichannelSeries, Profile, QGrid, ScaleGrid

DEFAULT_SHRINKAGE = 1e-6
_SHRINKAGE_LADDER = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


class Variant(str, enum.Enum):
    UNIVARIATE = "uni"
    EUCLIDEAN = "mmfdfa"
    MAHALANOBIS = "fm"


class CovMode(str, enum.Enum):
    IDENTITY = "identity"
    DIAGONAL = "diag"
    FULL = "full"


class CovScope(str, enum.Enum):
    GLOBAL = "global"
    PER_SCALE = "per_scale"


@dataclass(frozen=True)
class CovarianceEstimator:
    mode: CovMode = CovMode.FULL
    scope: CovScope = CovScope.GLOBAL
    shrinkage: float = DEFAULT_SHRINKAGE


@dataclass(frozen=True)
class DetrendConfig:
    order: int = 2
    mirrored: bool = True

    def __post_init__(self):
        if self.order < 0:
            raise MvFractalError(f"detrend order must be >= 0, got {self.order}")


@dataclass(frozen=True)
class SegmentedFluctuations:
    """Detrended residuals per scale, each of shape ``(2L, s, M)``."""

    per_scale: Mapping[int, np.ndarray]
    scale_grid: ScaleGrid
    detrend: DetrendConfig

    def segment_count(self, s: int) -> int:
        return self.per_scale[s].shape[0]

    @property
    def n_channels(self) -> int:
        return next(iter(self.per_scale.values())).shape[2]


@dataclass(frozen=True)
class FluctuationSurface:
    variant: Variant
    values: np.ndarray  # (len(q_grid), len(scale_grid))
    q_grid: QGrid
    scale_grid: ScaleGrid
    covariance_used: Union[SpdMatrix, Mapping[int, SpdMatrix], None] = None

    def at_q(self, q: float) -> np.ndarray:
        return self.values[self.q_grid.index(q)]


def cumulative_profile(series: MultichannelSeries) -> Profile:
    """Cumulative sum of the mean-removed samples, per channel."""
    x = series.samples
    mean = x.mean(axis=0)
    y = np.cumsum(x - mean, axis=0)
    y.setflags(write=False)
    mean.setflags(write=False)
    return Profile(y, mean)


@lru_cache(maxsize=256)
def _trend_basis(s: int, order: int) -> np.ndarray:
    # orthonormal basis of degree-`order` polynomials sampled on s points
    t = np.linspace(-1.0, 1.0, s)
    v = np.vander(t, order + 1, increasing=True)
    q, _ = np.linalg.qr(v)
    q.setflags(write=False)
    return q


def _profile_values(profile) -> np.ndarray:
    y = profile.values if isinstance(profile, Profile) else np.asarray(profile, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    return y


def segment_and_detrend(profile, s: int, cfg: DetrendConfig = DetrendConfig()) -> np.ndarray:
    """Cut the profile into windows of length ``s`` and remove a polynomial trend from each.

    Forward windows start at the first sample; with ``cfg.mirrored`` a second
    block of windows is taken backwards from the last sample, so the tail that
    does not fit a whole window is still covered. The result stacks the
    forward block and then the backward block (last window first) into an
    array of shape ``(2L, s, M)``.

    Only one whole window is required here; the stricter four-window rule is
    a property of the scale grid and is enforced by :func:`detrend_all`.
    """
    y = _profile_values(profile)
    n = y.shape[0]
    s = int(s)
    if s <= cfg.order + 1:
        raise RankDeficientFitError(f"scale {s} cannot support a degree-{cfg.order} fit")
    n_seg = n // s
    if n_seg < 1:
        raise ScaleTooLargeError(f"scale {s} is longer than the {n}-sample profile")
    blocks = [y[: n_seg * s].reshape(n_seg, s, -1)]
    if cfg.mirrored:
        blocks.append(y[n - n_seg * s :].reshape(n_seg, s, -1)[::-1])
    segs = np.concatenate(blocks, axis=0)
    basis = _trend_basis(s, cfg.order)
    coef = np.einsum("sk,vsm->vkm", basis, segs)
    return segs - np.einsum("sk,vkm->vsm", basis, coef)


def detrend_all(profile, scale_grid: ScaleGrid, cfg: DetrendConfig = DetrendConfig()) -> SegmentedFluctuations:
    y = _profile_values(profile)
    scale_grid.check(y.shape[0], cfg.order)
    per = {s: segment_and_detrend(y, s, cfg) for s in scale_grid}
    return SegmentedFluctuations(per, scale_grid, cfg)


def segment_energy(residuals: np.ndarray, cov: SpdMatrix | None = None) -> np.ndarray:
    """Mean squared (optionally Mahalanobis) residual length of every window.

    Returns one value per window, i.e. ``F^2(v, s)``.
    """
    z = residuals if cov is None else cov.whiten(residuals)
    return np.sum(z * z, axis=2).mean(axis=1)


def q_order_mean(energy: np.ndarray, q_values) -> np.ndarray:
    """q-order fluctuation values from per-window energies ``F^2(v, s)``.

    ``q = 0`` uses the logarithmic mean. Windows with zero energy are
    rejected for ``q <= 0`` instead of being clamped.
    """
    energy = np.asarray(energy, dtype=np.float64)
    out = np.empty(len(q_values))
    zero = np.any(energy <= 0)
    n = energy.size
    with np.errstate(divide="ignore"):
        log_e = np.log(energy)
    for i, q in enumerate(q_values):
        if zero and q <= 0:
            raise DegenerateSegmentError(f"window with zero fluctuation energy at q = {q}")
        if q == 0:
            out[i] = np.exp(0.5 * log_e.mean())
        elif abs(q) / 2 <= 50:
            out[i] = (np.sum(energy ** (q / 2)) / n) ** (1.0 / q)
        else:
            m = (q / 2) * log_e
            top = m.max()
            out[i] = np.exp((top + np.log(np.sum(np.exp(m - top))) - np.log(n)) / q)
    if np.any(out <= 0):
        raise DegenerateSegmentError("all windows have zero fluctuation energy")
    return out


def _surface(segmented: SegmentedFluctuations, q_grid: QGrid, variant: Variant, cov=None) -> FluctuationSurface:
    q = q_grid.q_values
    cols = []
    for s in segmented.scale_grid:
        c = cov.get(s) if isinstance(cov, Mapping) else cov
        cols.append(q_order_mean(segment_energy(segmented.per_scale[s], c), q))
    values = np.column_stack(cols)
    values.setflags(write=False)
    return FluctuationSurface(variant, values, q_grid, segmented.scale_grid, cov)


def fluctuation_univariate(segmented: SegmentedFluctuations, q_grid: QGrid) -> FluctuationSurface:
    if segmented.n_channels != 1:
        raise MultichannelInputError(f"univariate analysis needs one channel, got {segmented.n_channels}")
    return _surface(segmented, q_grid, Variant.UNIVARIATE)


def fluctuation_mmfdfa(segmented: SegmentedFluctuations, q_grid: QGrid) -> FluctuationSurface:
    """Euclidean multichannel fluctuation function: channel energies are simply summed."""
    return _surface(segmented, q_grid, Variant.EUCLIDEAN)


def fluctuation_fm(
    segmented: SegmentedFluctuations,
    cov: Union[SpdMatrix, Mapping[int, SpdMatrix]],
    q_grid: QGrid,
) -> FluctuationSurface:
    """Covariance-weighted fluctuation function.

    ``cov`` is one matrix for all scales or a mapping from scale to matrix.
    """
    m = segmented.n_channels
    mats = cov.values() if isinstance(cov, Mapping) else [cov]
    for c in mats:
        if c.dim != m:
            raise DimensionMismatchError(f"covariance is {c.dim}x{c.dim} but data has {m} channels")
    if isinstance(cov, Mapping):
        missing = [s for s in segmented.scale_grid if s not in cov]
        if missing:
            raise DimensionMismatchError(f"no covariance for scales {missing}")
    return _surface(segmented, q_grid, Variant.MAHALANOBIS, cov)


def _factorize_with_escalation(sigma: np.ndarray, shrinkage: float) -> SpdMatrix:
    ladder = [shrinkage] + [v for v in _SHRINKAGE_LADDER if v > shrinkage]
    err = None
    for lam in ladder:
        try:
            return spd_factorize(sigma, lam)
        except NotPositiveDefiniteError as exc:
            err = exc
    raise err


def estimate_covariance(residuals, est: CovarianceEstimator = CovarianceEstimator()) -> SpdMatrix:
    """Channel covariance pooled over every vector of ``residuals`` (last axis = channels)."""
    z = np.asarray(residuals, dtype=np.float64)
    m = z.shape[-1]
    z = z.reshape(-1, m)
    if est.mode == CovMode.IDENTITY:
        return SpdMatrix.identity(m)
    count = z.shape[0]
    if est.mode == CovMode.FULL and count < 4 * m:
        raise InsufficientSamplesError(f"{count} vectors for a {m}x{m} covariance (need {4 * m})")
    if count < 2:
        raise InsufficientSamplesError("need at least two vectors to estimate variances")
    zc = z - z.mean(axis=0)
    if est.mode == CovMode.DIAGONAL:
        sigma = np.diag(np.sum(zc * zc, axis=0) / (count - 1))
        shrink = 0.0
    else:
        sigma = zc.T @ zc / (count - 1)
        shrink = est.shrinkage
    return _factorize_with_escalation(sigma, shrink)


def covariance_for(segmented: SegmentedFluctuations, est: CovarianceEstimator = CovarianceEstimator()):
    """Covariance(s) to weight the fluctuation function with.

    The global scope pools the residuals at the smallest scale of the grid;
    the per-scale scope returns a mapping from scale to its own estimate.
    """
    if est.scope == CovScope.PER_SCALE:
        return {s: estimate_covariance(r, est) for s, r in segmented.per_scale.items()}
    smallest = segmented.scale_grid.scales[0]
    return estimate_covariance(segmented.per_scale[smallest], est)


def analyze_fluctuations(
    series: MultichannelSeries,
    variant: Variant = Variant.MAHALANOBIS,
    q_grid: QGrid | None = None,
    scale_grid: ScaleGrid | None = None,
    detrend: DetrendConfig = DetrendConfig(),
    covariance: CovarianceEstimator = CovarianceEstimator(),
) -> FluctuationSurface:
    """Profile, detrend and evaluate one fluctuation-function variant."""
    variant = Variant(variant)
    q_grid = q_grid or QGrid.default()
    scale_grid = scale_grid or ScaleGrid.default(series.n_samples, detrend.order)
    segmented = detrend_all(cumulative_profile(series), scale_grid, detrend)
    if variant == Variant.UNIVARIATE:
        return fluctuation_univariate(segmented, q_grid)
    if variant == Variant.EUCLIDEAN:
        return fluctuation_mmfdfa(segmented, q_grid)
    return fluctuation_fm(segmented, covariance_for(segmented, covariance), q_grid)
