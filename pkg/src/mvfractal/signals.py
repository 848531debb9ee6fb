"""Core data types and synthetic signal generators.

Time runs along rows and channels along columns everywhere in the package:
a series with ``N`` samples of ``M`` sensors is an ``(N, M)`` float array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    EmbeddingFailure,
    EmptyInputError,
    MvFractalError,
    NonFiniteError,
    RateNonPositiveError,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultichannelSeries:
    """An ``(N, M)`` block of real samples with its sampling rate and channel names."""

    samples: np.ndarray
    sample_rate_hz: float = 1.0
    channel_labels: tuple = ()

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def select(self, columns: Sequence[int]) -> "MultichannelSeries":
        cols = list(columns)
        return MultichannelSeries(
            _frozen(np.ascontiguousarray(self.samples[:, cols])),
            self.sample_rate_hz,
            tuple(self.channel_labels[c] for c in cols),
        )


def default_labels(m: int) -> tuple:
    return tuple(f"ch{j}" for j in range(m))


def validate_series(raw, rate: float = 1.0, labels: Sequence[str] | None = None) -> MultichannelSeries:
    """Check a raw sample matrix and wrap it in a :class:`MultichannelSeries`.

    A 1-D input is taken as a single channel. Nothing is repaired: a NaN or
    infinity raises :class:`NonFiniteError` carrying the offending row index.
    """
    arr = np.array(raw, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("input has no samples")
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise MvFractalError(f"expected an (N, M) matrix, got shape {arr.shape}")
    n, m = arr.shape
    if n < 2:
        raise MvFractalError(f"need at least 2 samples, got {n}")
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFiniteError(int(np.argwhere(bad)[0][0]))
    if not (np.isfinite(rate) and rate > 0):
        raise RateNonPositiveError(f"sample rate must be positive, got {rate}")
    if labels is None:
        labels = default_labels(m)
    labels = tuple(str(s) for s in labels)
    if len(labels) != m:
        raise MvFractalError(f"{len(labels)} channel labels for {m} channels")
    return MultichannelSeries(_frozen(arr), float(rate), labels)


@dataclass(frozen=True)
class Profile:
    values: np.ndarray
    source_mean: np.ndarray


@dataclass(frozen=True)
class ScaleGrid:
    """Strictly increasing integer window lengths."""

    scales: tuple

    def __post_init__(self):
        s = tuple(int(v) for v in self.scales)
        if len(s) == 0:
            raise MvFractalError("scale grid is empty")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise MvFractalError("scales must be strictly increasing")
        if s[0] < 1:
            raise MvFractalError("scales must be positive")
        object.__setattr__(self, "scales", s)

    def __len__(self):
        return len(self.scales)

    def __iter__(self):
        return iter(self.scales)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scales, dtype=np.float64)

    def check(self, n: int, order: int) -> None:
        """Raise unless every scale is usable for ``n`` samples and detrend ``order``."""
        from .errors import RankDeficientFitError, ScaleTooLargeError

        if self.scales[0] < order + 2:
            raise RankDeficientFitError(
                f"min scale {self.scales[0]} too small for detrend order {order} (need >= {order + 2})"
            )
        if self.scales[-1] > n // 4:
            raise ScaleTooLargeError(f"max scale {self.scales[-1]} exceeds N/4 = {n // 4}")

    @classmethod
    def logspaced(cls, smin: int, smax: int, count: int = 20) -> "ScaleGrid":
        if smax < smin:
            raise MvFractalError(f"empty scale range [{smin}, {smax}]")
        s = np.unique(np.round(np.logspace(np.log10(smin), np.log10(smax), count)).astype(int))
        return cls(tuple(s))

    @classmethod
    def default(cls, n: int, order: int = 2) -> "ScaleGrid":
        """20 log-spaced scales between 16 and N/4."""
        smin = max(16, order + 2)
        smax = n // 4
        if smax < smin:
            raise MvFractalError(f"series of length {n} too short for the default scale grid")
        return cls.logspaced(smin, smax, 20)


@dataclass(frozen=True)
class QGrid:
    """Strictly increasing moment orders; must contain q = 2."""

    q_values: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_values)
        if len(q) == 0:
            raise MvFractalError("q grid is empty")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise MvFractalError("q values must be strictly increasing")
        if 2.0 not in q:
            raise MvFractalError("q grid must contain q = 2")
        object.__setattr__(self, "q_values", q)

    def __len__(self):
        return len(self.q_values)

    def __iter__(self):
        return iter(self.q_values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.q_values, dtype=np.float64)

    def index(self, q: float) -> int:
        return self.q_values.index(float(q))

    @classmethod
    def arange(cls, qmin: float, qmax: float, step: float) -> "QGrid":
        count = int(round((qmax - qmin) / step)) + 1
        q = np.round(qmin + step * np.arange(count), 12)
        q[np.abs(q) < 1e-12] = 0.0
        return cls(tuple(q))

    @classmethod
    def default(cls) -> "QGrid":
        return cls.arange(-5.0, 5.0, 0.5)


# ---------------------------------------------------------------------------
# generators


def gen_white_noise(n: int, m: int = 1, seed: int = 0, sample_rate_hz: float = 1.0) -> MultichannelSeries:
    """I.i.d. standard normal samples."""
    if n < 64:
        raise MvFractalError(f"n must be >= 64, got {n}")
    if m < 1:
        raise MvFractalError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    return validate_series(rng.standard_normal((n, m)), sample_rate_hz)


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _equicorrelation_mixer(m: int, rho: float) -> np.ndarray:
    c = np.full((m, m), rho)
    np.fill_diagonal(c, 1.0)
    return np.linalg.cholesky(c)


def _fgn_channel(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    # Davies-Harte: embed the Toeplitz covariance in a 2n circulant
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise EmbeddingFailure(f"circulant embedding not nonnegative definite (min eigenvalue {eig.min():.3e})")
    eig = np.clip(eig, 0.0, None)
    w = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
    z = np.fft.fft(np.sqrt(eig / (2 * n)) * w)
    return z[:n].real


def gen_fgn(
    n: int,
    m: int = 1,
    hurst: float = 0.5,
    cross_corr: float = 0.0,
    seed: int = 0,
    sample_rate_hz: float = 1.0,
) -> MultichannelSeries:
    """Exact fractional Gaussian noise via circulant embedding.

    Each channel is drawn independently and the channels are then mixed by
    the Cholesky factor of an equicorrelation matrix, so every pair has
    correlation ``cross_corr`` while each marginal stays fGn with the same
    Hurst exponent.
    """
    if n < 64:
        raise MvFractalError(f"n must be >= 64, got {n}")
    if not 0.0 < hurst < 1.0:
        raise MvFractalError(f"hurst must lie in (0, 1), got {hurst}")
    if not 0.0 <= cross_corr < 1.0:
        raise MvFractalError(f"cross_corr must lie in [0, 1), got {cross_corr}")
    rng = np.random.default_rng(seed)
    z = np.column_stack([_fgn_channel(n, hurst, rng) for _ in range(m)])
    if m > 1 and cross_corr > 0:
        z = z @ _equicorrelation_mixer(m, cross_corr).T
    return validate_series(z, sample_rate_hz)


def binomial_cascade_tau(q, weights=(0.6, 0.4)) -> np.ndarray:
    """Mass exponents of the binomial multiplicative cascade."""
    a, b = weights
    q = np.asarray(q, dtype=np.float64)
    return -np.log2(a**q + b**q)


def binomial_cascade_alpha(q, weights=(0.6, 0.4)) -> np.ndarray:
    """Hoelder exponents d tau / d q of the binomial cascade, in closed form."""
    a, b = weights
    q = np.asarray(q, dtype=np.float64)
    wa, wb = a**q, b**q
    return -(wa * np.log2(a) + wb * np.log2(b)) / (wa + wb)


def _cascade_measure(levels: int, a: float, b: float, rng: np.random.Generator | None) -> np.ndarray:
    if rng is None:
        idx = np.arange(2**levels)
        ones = np.array([bin(i).count("1") for i in idx])
        return a**ones * b ** (levels - ones)
    mu = np.ones(1)
    for _ in range(levels):
        flip = rng.random(mu.size) < 0.5
        left = np.where(flip, b, a)
        nxt = np.empty(2 * mu.size)
        nxt[0::2] = mu * left
        nxt[1::2] = mu * (a + b - left)
        mu = nxt
    return mu


def gen_cascade(
    n: int,
    weights=(0.6, 0.4),
    m: int = 1,
    cross_corr: float = 0.0,
    seed: int | None = None,
    sample_rate_hz: float = 1.0,
) -> MultichannelSeries:
    """Binomial multiplicative cascade of length ``n`` (a power of two).

    With ``seed=None`` this is the deterministic construction where sample
    ``k`` carries ``a**ones(k) * b**(levels - ones(k))``. With a seed, the
    two weights are randomly swapped at every node; the partition function,
    and hence the multifractal spectrum, is unchanged but the spatial layout
    differs per draw. Multiple channels are standardized and mixed to the
    requested pairwise correlation.
    """
    levels = int(round(np.log2(n)))
    if n < 64 or 2**levels != n:
        raise MvFractalError(f"n must be a power of two >= 64, got {n}")
    a, b = (float(w) for w in weights)
    if a <= 0 or b <= 0:
        raise MvFractalError("cascade weights must be positive")
    if seed is None and m != 1:
        raise MvFractalError("a multichannel cascade needs a seed")
    rng = None if seed is None else np.random.default_rng(seed)
    x = np.column_stack([_cascade_measure(levels, a, b, rng) * n for _ in range(m)])
    if m > 1:
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        if cross_corr > 0:
            x = x @ _equicorrelation_mixer(m, cross_corr).T
    return validate_series(x, sample_rate_hz)


def tone_components(
    n: int,
    sample_rate_hz: float,
    freqs_hz: Sequence[float],
    amplitudes=None,
    phases=None,
    m: int = 1,
) -> np.ndarray:
    """Clean sinusoids, shape ``(n_tones, n, m)``.

    ``amplitudes`` and ``phases`` may be per tone ``(T,)`` or per tone and
    channel ``(T, m)``.
    """
    f = np.asarray(freqs_hz, dtype=np.float64)
    nt = f.size
    amp = np.ones((nt, m)) if amplitudes is None else np.broadcast_to(
        np.asarray(amplitudes, dtype=np.float64).reshape(nt, -1), (nt, m)
    )
    ph = np.zeros((nt, m)) if phases is None else np.broadcast_to(
        np.asarray(phases, dtype=np.float64).reshape(nt, -1), (nt, m)
    )
    t = np.arange(n) / sample_rate_hz
    return amp[:, None, :] * np.sin(2 * np.pi * f[:, None, None] * t[None, :, None] + ph[:, None, :])


def gen_tone_mix(
    n: int,
    sample_rate_hz: float,
    freqs_hz: Sequence[float],
    amplitudes=None,
    phases=None,
    m: int = 1,
    noise_std: float = 0.0,
    seed: int = 0,
) -> MultichannelSeries:
    """Sum of sinusoids plus optional white Gaussian noise."""
    x = tone_components(n, sample_rate_hz, freqs_hz, amplitudes, phases, m).sum(axis=0)
    if noise_std > 0:
        x = x + noise_std * np.random.default_rng(seed).standard_normal(x.shape)
    return validate_series(x, sample_rate_hz)
