"""Command line entry point: ``mvfractal {analyze,decompose,calibrate,classify,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .diagnosis import DiagnosisModel, DistanceKind, FeatureMode, MarginPolicy, calibrate_threshold, classify
from .errors import MvFractalError
from .fluctuation import CovarianceEstimator, CovMode, CovScope, DetrendConfig, Variant
from .io import SYNTH_KINDS, emit_synthetic, ingest, read_json, write_json, write_series
from .mvmd import MvmdConfig
from .pipeline import PipelineConfig, decompose_series, features_from_report, run_pipeline, _write_modes
from .mvmd import reconstruct_signal

log = logging.getLogger("mvfractal")


def _range(text: str, kinds) -> tuple:
    parts = text.split(":")
    if len(parts) != len(kinds):
        raise argparse.ArgumentTypeError(f"expected {len(kinds)} colon-separated values, got {text!r}")
    try:
        return tuple(k(p) for k, p in zip(kinds, parts))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _scales(text):
    return _range(text, (int, int, int))


def _qrange(text):
    return _range(text, (float, float, float))


def _fit_range(text):
    return _range(text, (int, int))


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_pipeline_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--input", help="signal file")
    p.add_argument("--format", choices=("csv", "raw64"))
    p.add_argument("--channels", help="comma-separated channel labels or indices")
    p.add_argument("--rate", type=float, help="sample rate in Hz (defaults to the time column or sidecar)")
    p.add_argument("--n-channels", type=int, help="channel count of raw64 input without a sidecar")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--k", type=int, help="number of MVMD modes; 0 disables MVMD")
    p.add_argument("--k1", type=int, help="override the automatically selected mode cutoff")
    p.add_argument("--alpha", type=float, help="MVMD bandwidth penalty")
    p.add_argument("--scales", type=_scales, metavar="MIN:MAX:COUNT")
    p.add_argument("--q", type=_qrange, metavar="MIN:MAX:STEP")
    p.add_argument("--detrend-order", type=int)
    p.add_argument("--cov", choices=[c.value for c in CovMode])
    p.add_argument("--cov-scope", choices=[c.value for c in CovScope])
    p.add_argument("--fit-range", type=_fit_range, metavar="SMIN:SMAX")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def build_config(args) -> PipelineConfig:
    base = read_json(args.config) if getattr(args, "config", None) else {}
    cfg = PipelineConfig.from_dict(base)
    upd = {}
    if args.input is not None:
        upd["input_path"] = args.input
    if args.format is not None:
        upd["input_format"] = args.format
    if args.channels is not None:
        upd["channels"] = tuple(c.strip() for c in args.channels.split(",") if c.strip())
    if args.rate is not None:
        upd["sample_rate_hz"] = args.rate
    if args.n_channels is not None:
        upd["n_channels"] = args.n_channels
    if args.variant is not None:
        upd["variant"] = Variant(args.variant)
    mvmd = cfg.mvmd
    if args.k is not None:
        mvmd = None if args.k == 0 else replace(mvmd or MvmdConfig(), k_modes=args.k)
    if args.alpha is not None and mvmd is not None:
        mvmd = replace(mvmd, penalty_alpha=args.alpha)
    upd["mvmd"] = mvmd
    if args.k1 is not None:
        upd["k1_override"] = args.k1
    if args.scales is not None:
        upd["scales"] = args.scales
    if args.q is not None:
        upd["q"] = args.q
    if args.detrend_order is not None:
        upd["detrend"] = replace(cfg.detrend, order=args.detrend_order)
    if args.cov is not None or args.cov_scope is not None:
        upd["covariance"] = CovarianceEstimator(
            CovMode(args.cov or cfg.covariance.mode),
            CovScope(args.cov_scope or cfg.covariance.scope),
            cfg.covariance.shrinkage,
        )
    if args.fit_range is not None:
        upd["fit_range"] = args.fit_range
    if args.out is not None:
        upd["output_dir"] = args.out
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.no_plots:
        upd["plots"] = False
    if getattr(args, "model", None):
        upd["model_path"] = args.model
    return replace(cfg, **upd)


def cmd_analyze(args) -> int:
    cfg = build_config(args)
    report = run_pipeline(cfg)
    fv = report.feature_vector.to_dict()
    print("\t".join(fv))
    print("\t".join(repr(v) for v in fv.values()))
    if report.decision is not None:
        d = report.decision
        print(f"decision\t{d.label.value}\tdistance={d.distance!r}\tthreshold={d.threshold!r}\tmargin={d.margin!r}")
    return 0


def cmd_decompose(args) -> int:
    cfg = build_config(args)
    if cfg.mvmd is None:
        raise MvFractalError("decompose needs --k >= 1")
    series = ingest(cfg.input_path, cfg.input_format, cfg.channels, cfg.sample_rate_hz, cfg.n_channels)
    modes = decompose_series(series, cfg)
    out = Path(cfg.output_dir or ".")
    _write_modes(out, modes, series.sample_rate_hz)
    np.save(out / "modes.npy", modes.modes)
    rec = reconstruct_signal(modes, modes.k1_cutoff, series.sample_rate_hz, series.channel_labels)
    write_series(rec, out / "reconstructed.csv", "csv")
    if cfg.plots:
        from .plotting import plot_modes

        plot_modes(modes, out / "modes.png", series.sample_rate_hz)
    print("mode\tomega_hz\th2")
    for k in range(modes.k):
        h = modes.hurst_per_mode[k] if modes.hurst_per_mode is not None else float("nan")
        print(f"{k + 1}\t{modes.omegas[k] * series.sample_rate_hz:.6g}\t{h:.6g}")
    print(f"k1\t{modes.k1_cutoff}")
    return 0


def _load_features(paths, mode):
    out = []
    for p in paths:
        mf, fv = features_from_report(read_json(p))
        out.append(mf if mode == FeatureMode.CURVES else fv)
    return out


def cmd_calibrate(args) -> int:
    mode = FeatureMode(args.feature_mode)
    healthy = _load_features(args.healthy, mode)
    faulty = _load_features(args.faulty, mode) if args.faulty else None
    model = calibrate_threshold(
        healthy, faulty, MarginPolicy(args.policy),
        None if args.distance == "auto" else DistanceKind(args.distance), mode, args.epsilon,
    )
    write_json(args.out, model.to_dict())
    if not args.no_plots:
        from .plotting import plot_spectra_groups

        groups = {"healthy": [features_from_report(read_json(p))[0] for p in args.healthy]}
        if args.faulty:
            groups["faulty"] = [features_from_report(read_json(p))[0] for p in args.faulty]
        plot_spectra_groups(groups, Path(args.out).with_suffix(".png"))
    print(f"threshold\t{model.threshold!r}\tdistance\t{model.distance_kind.value}\tpolicy\t{model.margin_policy.value}")
    return 0


def cmd_classify(args) -> int:
    model = DiagnosisModel.from_dict(read_json(args.model))
    print("report\tdistance\tthreshold\tmargin\tlabel")
    for p in args.reports:
        mf, fv = features_from_report(read_json(p))
        d = classify(mf if model.feature_mode == FeatureMode.CURVES else fv, model)
        print(f"{p}\t{d.distance!r}\t{d.threshold!r}\t{d.margin!r}\t{d.label.value}")
    return 0


def cmd_synth(args) -> int:
    params = {"n": args.n, "m": args.m, "seed": args.seed, "sample_rate_hz": args.rate}
    if args.kind == "fgn":
        params.update(hurst=args.hurst, cross_corr=args.cross_corr)
    elif args.kind == "cascade":
        params.update(weights=args.weights, cross_corr=args.cross_corr)
        if args.m == 1 and not args.random:
            params["seed"] = None
    elif args.kind == "tones":
        params.update(freqs_hz=args.freqs, noise_std=args.noise_std)
        if args.amplitudes:
            params["amplitudes"] = args.amplitudes
    path = emit_synthetic(args.kind, params, args.out, args.format, hex_floats=not args.decimal)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvfractal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full pipeline on one recording")
    _add_pipeline_args(p)
    p.add_argument("--model", help="diagnosis model JSON; adds a decision to the report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("decompose", help="MVMD, per-mode Hurst exponents and cutoff")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("calibrate", help="fit a diagnosis threshold from analyze reports")
    p.add_argument("--healthy", nargs="+", required=True, help="report.json files of healthy machines")
    p.add_argument("--faulty", nargs="*", help="report.json files of faulty machines")
    p.add_argument("--policy", choices=[m.value for m in MarginPolicy], default="max_healthy")
    p.add_argument("--distance", choices=["auto"] + [d.value for d in DistanceKind], default="auto")
    p.add_argument("--feature-mode", choices=[m.value for m in FeatureMode], default="scalars")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("classify", help="label analyze reports with a calibrated model")
    p.add_argument("--model", required=True)
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synth", help="write a synthetic benchmark signal with a metadata sidecar")
    p.add_argument("kind", choices=SYNTH_KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "raw64"), default="raw64")
    p.add_argument("--decimal", action="store_true", help="decimal instead of hex floats in CSV")
    p.add_argument("--n", type=int, default=2**14)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--cross-corr", type=float, default=0.0)
    p.add_argument("--weights", type=_floats, default=[0.6, 0.4])
    p.add_argument("--random", action="store_true", help="randomized cascade even for one channel")
    p.add_argument("--freqs", type=_floats, default=[50.0, 120.0])
    p.add_argument("--amplitudes", type=_floats)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


_RANGE_FLAGS = ("--q", "--scales", "--fit-range")


def parse_args(argv=None):
    """Parse ``argv``; range values such as ``--q -5:5:0.5`` may start with a minus sign."""
    argv = list(sys.argv[1:] if argv is None else argv)
    joined = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _RANGE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            joined.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        joined.append(tok)
        i += 1
    return build_parser().parse_args(joined)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MvFractalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
