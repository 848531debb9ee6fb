"""Figures written next to the TSV tables of a run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}

FIGSIZE = (3.4, 2.6)
# fixed metadata keeps re-renders of the same data byte-stable
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_fluctuation(surface, path, q_show=(-5, -2, 0, 2, 5)):
    """log-log F_q(s) for a handful of q values."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        s = surface.scale_grid.as_array()
        q = surface.q_grid.as_array()
        wanted = [i for i, v in enumerate(q) if v in q_show] or range(len(q))
        cmap = plt.get_cmap("viridis")
        for j, i in enumerate(wanted):
            ax.loglog(s, surface.values[i], "o-", color=cmap(j / max(len(wanted) - 1, 1)), label=f"q={q[i]:g}")
        ax.set_xlabel("scale s")
        ax.set_ylabel(r"$F_q(s)$")
        ax.legend(frameon=False)
        return _save(fig, path)


def _curve(x, y, xlabel, ylabel, path, flag=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot(x, y, "o-", color="k")
        if flag is not None and np.any(flag):
            ax.plot(np.asarray(x)[flag], np.asarray(y)[flag], "x", color="tab:red", label=r"$r^2<0.95$")
            ax.legend(frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def plot_hurst(features, path):
    q = features.q_grid.as_array()
    return _curve(q, features.h_q, "q", r"$H_q$", path, features.low_quality)


def plot_tau(features, path):
    return _curve(features.q_grid.as_array(), features.tau_q, "q", r"$\tau_q$", path)


def plot_spectrum(features, path):
    return _curve(features.alpha_q, features.f_alpha, r"$\alpha$", r"$f(\alpha)$", path)


def plot_modes(modes, path, sample_rate_hz=1.0):
    """Per-mode centre frequency and q=2 Hurst exponent, cutoff marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        k = np.arange(1, modes.k + 1)
        if modes.hurst_per_mode is not None:
            ax.plot(k, modes.hurst_per_mode, "o-", color="k")
            ax.set_ylabel(r"$H_2$ per mode")
        else:
            ax.plot(k, modes.omegas * sample_rate_hz, "o-", color="k")
            ax.set_ylabel("centre frequency (Hz)")
        if modes.k1_cutoff is not None:
            ax.axvline(modes.k1_cutoff + 0.5, color="tab:red", ls="--", lw=0.8)
        ax.set_xlabel("mode k")
        return _save(fig, path)


def plot_spectra_groups(groups: dict, path):
    """Overlay f(alpha) curves of several labelled groups (e.g. healthy vs faulty)."""
    colors = ["tab:blue", "tab:red", "tab:green", "tab:orange"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        for c, (name, items) in zip(colors, groups.items()):
            for i, feat in enumerate(items):
                ax.plot(feat.alpha_q, feat.f_alpha, "-", color=c, alpha=0.7, label=name if i == 0 else None)
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel(r"$f(\alpha)$")
        ax.legend(frameon=False)
        return _save(fig, path)
