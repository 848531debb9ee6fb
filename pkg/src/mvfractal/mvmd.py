"""Multivariate variational mode decomposition and Hurst-based mode selection.

The solver follows the usual ADMM scheme in the frequency domain: each mode
spectrum gets a Wiener-filter update around its current centre frequency,
the centre frequency moves to the power-weighted mean frequency of that mode
over all channels, and a dual variable enforces the reconstruction
constraint. All channels of a mode share one centre frequency.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import IndexOutOfRangeError, KTooLargeError, MvFractalError, SingleModeError
from .features import fit_hurst
from .fluctuation import (
    CovarianceEstimator,
    DetrendConfig,
    covariance_for,
    cumulative_profile,
    detrend_all,
    fluctuation_fm,
)
from .signals import MultichannelSeries, QGrid, ScaleGrid, validate_series


class OmegaInit(str, enum.Enum):
    UNIFORM = "uniform"
    RANDOM = "random"
    ZERO = "zero"


@dataclass(frozen=True)
class MvmdConfig:
    k_modes: int = 8
    penalty_alpha: float = 2000.0
    tolerance: float = 1e-6
    max_iterations: int = 500
    omega_init: OmegaInit = OmegaInit.UNIFORM
    seed: int = 0
    dual_step: float = 1.0

    def __post_init__(self):
        if self.k_modes < 1:
            raise MvFractalError("k_modes must be >= 1")
        if self.penalty_alpha <= 0:
            raise MvFractalError("penalty_alpha must be positive")
        if not 0 < self.tolerance < 1:
            raise MvFractalError("tolerance must lie in (0, 1)")
        if self.max_iterations < 10:
            raise MvFractalError("max_iterations must be >= 10")
        object.__setattr__(self, "omega_init", OmegaInit(self.omega_init))


@dataclass(frozen=True)
class ModeSet:
    """Decomposed modes, shape ``(K, N, M)``, with centre frequencies in cycles per sample."""

    modes: np.ndarray
    omegas: np.ndarray
    residual: np.ndarray
    converged: bool = True
    iterations: int = 0
    k1_cutoff: int | None = None
    hurst_per_mode: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.modes.shape[0]

    @property
    def relative_residual(self) -> float:
        x = self.modes.sum(axis=0) + self.residual
        return float(np.linalg.norm(self.residual) / max(np.linalg.norm(x), np.finfo(float).tiny))

    @classmethod
    def from_components(cls, components, signal=None, omegas=None) -> "ModeSet":
        """Wrap precomputed components; the residual closes ``signal`` exactly."""
        modes = np.asarray(components, dtype=np.float64)
        if modes.ndim == 2:
            modes = modes[:, :, None]
        x = modes.sum(axis=0) if signal is None else np.asarray(signal, dtype=np.float64).reshape(modes.shape[1:])
        if omegas is None:
            omegas = np.arange(1, modes.shape[0] + 1) * 0.5 / (modes.shape[0] + 1)
        return cls(modes, np.asarray(omegas, dtype=np.float64), x - modes.sum(axis=0))


def _initial_omegas(cfg: MvmdConfig, n: int) -> np.ndarray:
    k = cfg.k_modes
    if cfg.omega_init == OmegaInit.UNIFORM:
        return (0.5 / k) * (np.arange(k) + 0.5)
    if cfg.omega_init == OmegaInit.RANDOM:
        rng = np.random.default_rng(cfg.seed)
        fs = 1.0 / n
        return np.sort(np.exp(np.log(fs) + (np.log(0.5) - np.log(fs)) * rng.random(k)))
    return np.zeros(k)


def mvmd_decompose(series: MultichannelSeries, cfg: MvmdConfig = MvmdConfig()) -> ModeSet:
    """Decompose a multichannel series into ``cfg.k_modes`` jointly narrowband modes.

    Non-convergence within ``max_iterations`` is reported through
    ``ModeSet.converged`` and a ``RuntimeWarning``; the partial result is
    still returned.
    """
    x = series.samples
    n, m = x.shape
    k = cfg.k_modes
    if n < 4 * k:
        raise KTooLargeError(f"{k} modes need at least {4 * k} samples, got {n}")

    # symmetric extension halves the boundary effects of the periodic FFT
    half = n // 2
    f = np.concatenate([x[:half][::-1], x, x[half:][::-1]], axis=0)
    t_len = f.shape[0]
    freqs = np.fft.fftshift(np.fft.fftfreq(t_len))
    pos = freqs >= 0
    f_hat = np.fft.fftshift(np.fft.fft(f, axis=0), axes=0)
    f_hat[~pos] = 0.0

    omega = _initial_omegas(cfg, n)
    u_hat = np.zeros((k, t_len, m), dtype=np.complex128)
    lam = np.zeros((t_len, m), dtype=np.complex128)
    total = np.zeros((t_len, m), dtype=np.complex128)
    fpos = freqs[pos]

    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        prev = u_hat.copy()
        for j in range(k):
            others = total - u_hat[j]
            u_hat[j] = (f_hat - others - lam / 2) / (1.0 + cfg.penalty_alpha * (freqs - omega[j]) ** 2)[:, None]
            total = others + u_hat[j]
            power = np.abs(u_hat[j, pos]) ** 2
            psum = power.sum()
            if psum > 0:
                omega[j] = float(fpos @ power.sum(axis=1) / psum)
        if cfg.dual_step > 0:
            lam = lam + cfg.dual_step * (total - f_hat)
        change = np.sum(np.abs(u_hat - prev) ** 2)
        scale = np.sum(np.abs(prev) ** 2)
        if scale > 0 and np.sqrt(change / scale) < cfg.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(f"MVMD did not converge in {cfg.max_iterations} iterations", RuntimeWarning, stacklevel=2)

    # Hermitian completion of the one-sided spectra, then back to time
    full = np.zeros_like(u_hat)
    c = t_len // 2
    full[:, c:] = u_hat[:, c:]
    full[:, c - np.arange(c)] = np.conj(u_hat[:, c : c + c])
    full[:, 0] = np.conj(full[:, -1])
    u = np.fft.ifft(np.fft.ifftshift(full, axes=1), axis=1).real
    u = u[:, half : half + n]

    order = np.argsort(omega, kind="stable")
    modes = np.ascontiguousarray(u[order])
    omegas = omega[order]
    residual = x - modes.sum(axis=0)
    for a in (modes, omegas, residual):
        a.setflags(write=False)
    return ModeSet(modes, omegas, residual, converged, it)


def score_modes_hurst(
    modes: ModeSet,
    scale_grid: ScaleGrid | None = None,
    detrend: DetrendConfig = DetrendConfig(),
    covariance: CovarianceEstimator = CovarianceEstimator(),
    fit_range: tuple | None = None,
) -> ModeSet:
    """Attach the covariance-weighted q = 2 Hurst exponent of every mode."""
    n = modes.modes.shape[1]
    grid = scale_grid or ScaleGrid.default(n, detrend.order)
    q2 = QGrid((2.0,))
    hs = []
    for u in modes.modes:
        segmented = detrend_all(cumulative_profile(validate_series(u)), grid, detrend)
        surface = fluctuation_fm(segmented, covariance_for(segmented, covariance), q2)
        hs.append(fit_hurst(surface, fit_range).h_q[0])
    h = np.array(hs)
    h.setflags(write=False)
    return replace(modes, hurst_per_mode=h)


def select_k1(modes_or_h) -> int:
    """Cutoff index (1-based) at the largest jump between consecutive mode Hurst exponents.

    Ties go to the smaller index.
    """
    h = modes_or_h.hurst_per_mode if isinstance(modes_or_h, ModeSet) else modes_or_h
    if h is None:
        raise MvFractalError("modes have not been scored; call score_modes_hurst first")
    h = np.asarray(h, dtype=np.float64)
    if h.size < 2:
        raise SingleModeError("need at least two modes to select a cutoff")
    gaps = np.abs(np.diff(h))
    return int(np.argmax(gaps)) + 1


def reconstruct_signal(modes: ModeSet, k1: int, sample_rate_hz: float = 1.0, labels=None) -> MultichannelSeries:
    """Sum of the first ``k1`` modes."""
    if not 1 <= k1 <= modes.k:
        raise IndexOutOfRangeError(f"k1 must lie in [1, {modes.k}], got {k1}")
    return validate_series(modes.modes[:k1].sum(axis=0), sample_rate_hz, labels)
