"""End-to-end analysis: ingest, optional MVMD mode selection, fluctuation analysis, features, decision."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diagnosis import DiagnosisModel, HealthDecision, classify
from .errors import MvFractalError, StageError
from .features import FeatureVector, MultifractalFeatures, multifractal_features, summarize_features
from .fluctuation import (
    CovarianceEstimator,
    CovMode,
    CovScope,
    DetrendConfig,
    FluctuationSurface,
    Variant,
    analyze_fluctuations,
)
from .io import read_json, sha256_file, write_json, write_tsv, atomic_write_text, ingest
from .mvmd import ModeSet, MvmdConfig, OmegaInit, mvmd_decompose, reconstruct_signal, score_modes_hurst, select_k1
from .signals import MultichannelSeries, QGrid, ScaleGrid

REPORT_NAME = "report.json"
FAILURE_MARKER = "FAILED"


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str | None = None
    input_format: str = "csv"
    channels: tuple | None = None
    sample_rate_hz: float | None = None
    n_channels: int | None = None
    mvmd: MvmdConfig | None = MvmdConfig()
    k1_override: int | None = None
    detrend: DetrendConfig = DetrendConfig()
    scales: tuple | None = None  # (min, max, count)
    q: tuple | None = None  # (min, max, step)
    covariance: CovarianceEstimator = CovarianceEstimator()
    variant: Variant = Variant.MAHALANOBIS
    fit_range: tuple | None = None
    output_dir: str | None = None
    seed: int = 0
    plots: bool = True
    model_path: str | None = None

    # fields that cannot change any computed number
    _NON_SEMANTIC = ("output_dir", "plots")

    def to_dict(self) -> dict:
        d = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if k == "mvmd":
                v = None if v is None else {**asdict(v), "omega_init": v.omega_init.value}
            elif k == "detrend":
                v = asdict(v)
            elif k == "covariance":
                v = {"mode": v.mode.value, "scope": v.scope.value, "shrinkage": v.shrinkage}
            elif k == "variant":
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        kw = {}
        for k in cls.__dataclass_fields__:
            if k not in d:
                continue
            v = d[k]
            if k == "mvmd" and v is not None:
                v = MvmdConfig(**v)
            elif k == "detrend":
                v = DetrendConfig(**v)
            elif k == "covariance":
                v = CovarianceEstimator(CovMode(v.get("mode", "full")), CovScope(v.get("scope", "global")),
                                        float(v.get("shrinkage", 1e-6)))
            elif k == "variant":
                v = Variant(v)
            elif isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise MvFractalError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)

    def semantic_dict(self) -> dict:
        return {k: v for k, v in self.to_dict().items() if k not in self._NON_SEMANTIC}

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.semantic_dict(), sort_keys=True).encode()).hexdigest()

    def q_grid(self) -> QGrid:
        return QGrid.default() if self.q is None else QGrid.arange(*self.q)

    def scale_grid(self, n: int) -> ScaleGrid:
        if self.scales is None:
            return ScaleGrid.default(n, self.detrend.order)
        lo, hi, count = self.scales
        return ScaleGrid.logspaced(int(lo), int(hi), int(count))


@dataclass
class RunReport:
    series_meta: dict
    surface: FluctuationSurface
    features: MultifractalFeatures
    feature_vector: FeatureVector
    modes: ModeSet | None = None
    decision: HealthDecision | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        f = self.features
        cov = self.surface.covariance_used
        if cov is None or isinstance(cov, dict):
            cov_out = None if cov is None else {str(s): c.sigma.tolist() for s, c in cov.items()}
        else:
            cov_out = cov.sigma.tolist()
        out = {
            "series": self.series_meta,
            "surface": {
                "variant": self.surface.variant.value,
                "q": list(self.surface.q_grid.q_values),
                "scales": list(self.surface.scale_grid.scales),
                "values": self.surface.values.tolist(),
                "covariance": cov_out,
            },
            "features": {
                "q": list(f.q_grid.q_values),
                "h_q": f.h_q.tolist(),
                "h_fit_r2": f.h_fit_r2.tolist(),
                "low_quality": f.low_quality.tolist(),
                "h_monotone_violation": f.monotone_violation,
                "tau_q": f.tau_q.tolist(),
                "alpha_q": f.alpha_q.tolist(),
                "f_alpha": f.f_alpha.tolist(),
            },
            "feature_vector": self.feature_vector.to_dict(),
            "modes": None,
            "decision": None if self.decision is None else self.decision.to_dict(),
            "provenance": self.provenance,
        }
        if self.modes is not None:
            m = self.modes
            out["modes"] = {
                "k": m.k,
                "omegas": m.omegas.tolist(),
                "omegas_hz": (m.omegas * self.series_meta["sample_rate_hz"]).tolist(),
                "hurst_per_mode": None if m.hurst_per_mode is None else m.hurst_per_mode.tolist(),
                "k1": m.k1_cutoff,
                "converged": m.converged,
                "iterations": m.iterations,
                "relative_residual": m.relative_residual,
            }
        return out


def features_from_report(d: dict) -> tuple[MultifractalFeatures, FeatureVector]:
    """Rebuild feature objects from a serialized report dictionary."""
    f = d["features"]
    arr = lambda k: np.asarray(f[k], dtype=np.float64)  # noqa: E731
    mf = MultifractalFeatures(QGrid(tuple(f["q"])), arr("h_q"), arr("h_fit_r2"), arr("tau_q"), arr("alpha_q"),
                              arr("f_alpha"))
    return mf, FeatureVector.from_dict(d["feature_vector"])


def analyze_series(series: MultichannelSeries, cfg: PipelineConfig):
    """Fluctuation surface, features and descriptor vector of a (possibly reconstructed) series."""
    variant = Variant(cfg.variant)
    if variant == Variant.UNIVARIATE and series.n_channels != 1:
        raise MvFractalError(f"the univariate variant needs exactly one channel, got {series.n_channels}")
    surface = analyze_fluctuations(
        series, variant, cfg.q_grid(), cfg.scale_grid(series.n_samples), cfg.detrend, cfg.covariance
    )
    features = multifractal_features(surface, cfg.fit_range)
    return surface, features, summarize_features(features)


def decompose_series(series: MultichannelSeries, cfg: PipelineConfig) -> ModeSet:
    mcfg = replace(cfg.mvmd, seed=cfg.seed)
    modes = mvmd_decompose(series, mcfg)
    if modes.k >= 2:
        modes = score_modes_hurst(modes, cfg.scale_grid(series.n_samples), cfg.detrend, cfg.covariance,
                                  cfg.fit_range)
        k1 = cfg.k1_override or select_k1(modes)
    else:
        k1 = 1
    return replace(modes, k1_cutoff=int(k1))


def _series_meta(series: MultichannelSeries) -> dict:
    return {
        "n_samples": series.n_samples,
        "n_channels": series.n_channels,
        "sample_rate_hz": series.sample_rate_hz,
        "channel_labels": list(series.channel_labels),
    }


def run_pipeline(cfg: PipelineConfig, series: MultichannelSeries | None = None) -> RunReport:
    """Run every configured stage and, with ``cfg.output_dir`` set, write the outputs.

    Any stage failure is re-raised as :class:`StageError`; whatever was
    already written stays on disk next to a ``FAILED`` marker file.
    """
    out = Path(cfg.output_dir) if cfg.output_dir else None
    stage = "ingest"
    if out is not None and (out / FAILURE_MARKER).exists():
        (out / FAILURE_MARKER).unlink()
    try:
        provenance = {
            "config_hash": cfg.config_hash(),
            "config": cfg.semantic_dict(),
            "version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "seed": cfg.seed,
        }
        if series is None:
            if cfg.input_path is None:
                raise MvFractalError("no input given")
            series = ingest(cfg.input_path, cfg.input_format, cfg.channels, cfg.sample_rate_hz, cfg.n_channels)
            provenance["input_sha256"] = sha256_file(cfg.input_path)
        modes = None
        analysed = series
        if cfg.mvmd is not None:
            stage = "mvmd"
            modes = decompose_series(series, cfg)
            analysed = reconstruct_signal(modes, modes.k1_cutoff, series.sample_rate_hz, series.channel_labels)
            if out is not None:
                _write_modes(out, modes, series.sample_rate_hz)
        stage = "fluctuation"
        surface, features, fv = analyze_series(analysed, cfg)
        decision = None
        if cfg.model_path:
            stage = "classify"
            decision = classify(fv, DiagnosisModel.from_dict(read_json(cfg.model_path)))
        provenance["created"] = datetime.now(timezone.utc).isoformat()
        report = RunReport(_series_meta(series), surface, features, fv, modes, decision, provenance)
        if out is not None:
            stage = "write"
            write_outputs(report, out, cfg.plots)
        return report
    except Exception as exc:
        if out is not None:
            atomic_write_text(out / FAILURE_MARKER, f"{stage}\n{exc}\n")
        raise StageError(stage, exc) from exc


def _write_modes(out: Path, modes: ModeSet, rate: float):
    rows = []
    for k in range(modes.k):
        h = float("nan") if modes.hurst_per_mode is None else modes.hurst_per_mode[k]
        rows.append((k + 1, modes.omegas[k], modes.omegas[k] * rate, h, int(k < (modes.k1_cutoff or 0))))
    write_tsv(out / "modes.tsv", ("mode", "omega_cycles_per_sample", "omega_hz", "h2", "selected"), rows)


def write_outputs(report: RunReport, out: Path, plots: bool = True) -> list[Path]:
    """Report JSON, plot-ready TSV tables and (optionally) PNG figures."""
    out = Path(out)
    paths = [write_json(out / REPORT_NAME, report.to_dict())]
    s = report.surface
    rows = []
    for i, q in enumerate(s.q_grid):
        for j, sc in enumerate(s.scale_grid):
            v = s.values[i, j]
            rows.append((q, sc, np.log10(sc), v, np.log10(v)))
    paths.append(write_tsv(out / "fluctuation.tsv", ("q", "s", "log10_s", "F", "log10_F"), rows))
    f = report.features
    q = f.q_grid.as_array()
    paths.append(write_tsv(out / "hurst.tsv", ("q", "h_q", "r2", "low_quality"),
                           zip(q, f.h_q, f.h_fit_r2, f.low_quality)))
    paths.append(write_tsv(out / "tau.tsv", ("q", "tau_q"), zip(q, f.tau_q)))
    paths.append(write_tsv(out / "spectrum.tsv", ("q", "alpha", "f_alpha"), zip(q, f.alpha_q, f.f_alpha)))
    if plots:
        from . import plotting

        paths.append(plotting.plot_fluctuation(s, out / "fluctuation.png"))
        paths.append(plotting.plot_hurst(f, out / "hurst.png"))
        paths.append(plotting.plot_tau(f, out / "tau.png"))
        paths.append(plotting.plot_spectrum(f, out / "spectrum.png"))
        if report.modes is not None:
            paths.append(plotting.plot_modes(report.modes, out / "modes.png", report.series_meta["sample_rate_hz"]))
    return paths
