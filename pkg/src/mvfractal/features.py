"""Scaling exponents, mass exponents and the singularity spectrum."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import GridTooCoarseError, MvFractalError, TooFewScalesError
from .fluctuation import FluctuationSurface
from .signals import QGrid

# fits below this coefficient of determination are flagged, never dropped
R2_QUALITY_THRESHOLD = 0.95


@dataclass(frozen=True)
class MultifractalFeatures:
    q_grid: QGrid
    h_q: np.ndarray
    h_fit_r2: np.ndarray | None = None
    tau_q: np.ndarray | None = None
    alpha_q: np.ndarray | None = None
    f_alpha: np.ndarray | None = None

    @property
    def complete(self) -> bool:
        return self.tau_q is not None

    @property
    def low_quality(self) -> np.ndarray:
        """Mask of q values whose log-log fit has r^2 below the threshold."""
        if self.h_fit_r2 is None:
            return np.zeros(len(self.q_grid), dtype=bool)
        return self.h_fit_r2 < R2_QUALITY_THRESHOLD

    def h_at(self, q: float) -> float:
        return float(self.h_q[self.q_grid.index(q)])

    @property
    def monotone_violation(self) -> bool:
        """True when h_q increases with q anywhere by more than 1e-6."""
        return bool(np.any(np.diff(self.h_q) > 1e-6))


FEATURE_NAMES = ("delta_h", "spectrum_width", "spectrum_skew", "alpha_peak", "h2", "tau_curvature")


@dataclass(frozen=True)
class FeatureVector:
    delta_h: float
    spectrum_width: float
    spectrum_skew: float
    alpha_peak: float
    h2: float
    tau_curvature: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    def to_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureVector":
        return cls(**{name: float(d[name]) for name in FEATURE_NAMES})


def fit_hurst(surface: FluctuationSurface, fit_range: tuple | None = None) -> MultifractalFeatures:
    """Least-squares slope of ``log F_q(s)`` against ``log s`` for every q.

    Args:
        surface: fluctuation values on a (q, s) grid.
        fit_range: optional inclusive ``(s_min, s_max)`` restricting the fit.

    Returns:
        Features holding only ``h_q`` and the per-q r^2.
    """
    s = surface.scale_grid.as_array()
    keep = np.ones(s.size, dtype=bool)
    if fit_range is not None:
        lo, hi = fit_range
        keep = (s >= lo) & (s <= hi)
    if keep.sum() < 4:
        raise TooFewScalesError(f"{int(keep.sum())} scales in the fit range (need 4)")
    x = np.log(s[keep])
    y = np.log(surface.values[:, keep])
    xc = x - x.mean()
    yc = y - y.mean(axis=1, keepdims=True)
    slope = yc @ xc / (xc @ xc)
    resid = yc - slope[:, None] * xc[None, :]
    ss_tot = np.sum(yc * yc, axis=1)
    ss_res = np.sum(resid * resid, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, 1.0)
    return MultifractalFeatures(surface.q_grid, slope, r2)


def derive_spectrum(h_q, q_grid: QGrid, h_fit_r2=None) -> MultifractalFeatures:
    """Mass exponents, Hoelder exponents and singularity spectrum from ``h_q``.

    ``alpha`` is the numerical derivative of ``tau`` on the q grid (second
    order central differences inside, one-sided at the ends) and
    ``f = q * alpha - tau``.
    """
    q = q_grid.as_array()
    h = np.asarray(h_q, dtype=np.float64)
    if q.size < 3:
        raise GridTooCoarseError(f"need at least 3 q values, got {q.size}")
    if h.shape != q.shape:
        raise MvFractalError(f"h_q has shape {h.shape}, q grid has {q.size} entries")
    tau = q * h - 1.0
    alpha = np.gradient(tau, q, edge_order=2)
    f = q * alpha - tau
    return MultifractalFeatures(q_grid, h, h_fit_r2, tau, alpha, f)


def multifractal_features(surface: FluctuationSurface, fit_range: tuple | None = None) -> MultifractalFeatures:
    fit = fit_hurst(surface, fit_range)
    return derive_spectrum(fit.h_q, fit.q_grid, fit.h_fit_r2)


def _second_difference(q: np.ndarray, tau: np.ndarray, i: int) -> float:
    i = min(max(i, 1), q.size - 2)
    h0, h1 = q[i] - q[i - 1], q[i + 1] - q[i]
    return float(2.0 * (h0 * tau[i + 1] - (h0 + h1) * tau[i] + h1 * tau[i - 1]) / (h0 * h1 * (h0 + h1)))


def summarize_features(features: MultifractalFeatures) -> FeatureVector:
    if not features.complete:
        raise MvFractalError("features are missing the spectrum; call derive_spectrum first")
    q = features.q_grid.as_array()
    alpha, f = features.alpha_q, features.f_alpha
    a_min, a_max = float(alpha.min()), float(alpha.max())
    width = a_max - a_min
    a_peak = float(alpha[int(np.argmax(f))])
    skew = ((a_peak - a_min) - (a_max - a_peak)) / width if width > 0 else 0.0
    return FeatureVector(
        delta_h=float(features.h_q.max() - features.h_q.min()),
        spectrum_width=width,
        spectrum_skew=float(np.clip(skew, -1.0, 1.0)),
        alpha_peak=a_peak,
        h2=features.h_at(2.0),
        tau_curvature=_second_difference(q, features.tau_q, int(np.argmin(np.abs(q)))),
    )
