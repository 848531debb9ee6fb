import json
from dataclasses import replace

import numpy as np
import pytest

from mvfractal import (
    CovarianceEstimator,
    CovMode,
    ModeSet,
    MvmdConfig,
    Variant,
    gen_white_noise,
    reconstruct_signal,
    validate_series,
)
from mvfractal.cli import build_config, build_parser, main, parse_args
from mvfractal.errors import ChannelNotFoundError, MvFractalError, ParseError, StageError, TruncatedRecordError
from mvfractal.io import (
    emit_synthetic,
    ingest,
    read_json,
    read_sidecar,
    read_tsv,
    synthesize,
    write_csv_series,
    write_raw_f64,
)
from mvfractal.pipeline import FAILURE_MARKER, PipelineConfig, analyze_series, run_pipeline

FAST = PipelineConfig(mvmd=None, plots=False)


def test_csv_time_column_and_selection(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t,AN3,AN4\n0.0,1.5,2.5\n0.5,-1.0,0x1.8p1\n")
    s = ingest(p, "csv", ["AN4"])
    assert (s.n_samples, s.n_channels) == (2, 1)
    assert s.channel_labels == ("AN4",)
    np.testing.assert_array_equal(s.samples[:, 0], [2.5, 3.0])
    assert s.sample_rate_hz == 2.0


def test_csv_eight_channels(tmp_path):
    labels = [f"AN{k}" for k in range(3, 11)]
    p = tmp_path / "g.csv"
    rows = "\n".join(",".join(str(i + j) for j in range(8)) for i in range(5))
    p.write_text(",".join(labels) + "\n" + rows + "\n")
    s = ingest(p, "csv", sample_rate_hz=40_000.0)
    assert s.n_channels == 8 and s.channel_labels == tuple(labels) and s.sample_rate_hz == 40_000.0
    assert ingest(p, "csv", [0, "AN10"]).channel_labels == ("AN3", "AN10")


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ParseError) as info:
        ingest(p)
    assert info.value.line == 3
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(ParseError):
        ingest(p)
    p.write_text("a,b\n1,2\n3,4\n")
    with pytest.raises(ChannelNotFoundError):
        ingest(p, "csv", ["c"])
    with pytest.raises(ChannelNotFoundError):
        ingest(p, "csv", [5])


def test_raw64_layout(tmp_path):
    p = tmp_path / "r.f64"
    p.write_bytes(np.arange(16, dtype="<f8").tobytes())
    s = ingest(p, "raw64", n_channels=2, sample_rate_hz=10.0)
    assert s.samples.shape == (8, 2)
    np.testing.assert_array_equal(s.samples[1], [2.0, 3.0])
    p.write_bytes(np.arange(15, dtype="<f8").tobytes())
    with pytest.raises(TruncatedRecordError):
        ingest(p, "raw64", n_channels=2)
    with pytest.raises(MvFractalError):
        ingest(p, "raw64")


def test_csv_round_trips(tmp_path, rng):
    s = validate_series(rng.standard_normal((50, 3)) * 1e3, 5.0)
    for hex_floats in (False, True):
        p = write_csv_series(s, tmp_path / f"x{hex_floats}.csv", hex_floats)
        assert ingest(p, "csv", sample_rate_hz=5.0).samples.tobytes() == s.samples.tobytes()
    q = write_raw_f64(s, tmp_path / "x.f64")
    assert ingest(q, "raw64", n_channels=3).samples.tobytes() == s.samples.tobytes()


def test_emit_fgn_round_trip(tmp_path):
    params = {"n": 2**14, "m": 2, "hurst": 0.7, "seed": 3}
    for fmt in ("raw64", "csv"):
        p = emit_synthetic("fgn", params, tmp_path / f"f.{fmt}", fmt)
        assert ingest(p, fmt).samples.tobytes() == synthesize("fgn", params).samples.tobytes()


def test_emit_cascade_sidecar(tmp_path):
    p = emit_synthetic("cascade", {"n": 1024, "weights": [0.6, 0.4]}, tmp_path / "c.f64")
    meta = read_sidecar(p)
    assert meta["params"]["weights"] == [0.6, 0.4] and meta["kind"] == "cascade"
    assert meta["n_samples"] == 1024 and meta["n_channels"] == 1


def test_emit_tones_fft(tmp_path):
    p = emit_synthetic("tones", {"n": 1000, "sample_rate_hz": 1000.0, "freqs_hz": [50.0, 120.0]},
                       tmp_path / "t.csv", "csv")
    s = ingest(p, "csv")
    assert s.sample_rate_hz == 1000.0
    mag = np.abs(np.fft.rfft(s.samples[:, 0]))
    freqs = np.fft.rfftfreq(s.n_samples, 1 / s.sample_rate_hz)
    assert sorted(freqs[np.argsort(mag)[-2:]]) == [50.0, 120.0]


def test_unknown_kind(tmp_path):
    with pytest.raises(MvFractalError):
        emit_synthetic("chirp", {"n": 64}, tmp_path / "x")


def test_pipeline_univariate_white(tmp_path):
    src = emit_synthetic("white", {"n": 2**14, "seed": 2}, tmp_path / "w.f64")
    cfg = PipelineConfig(input_path=str(src), input_format="raw64", mvmd=None, variant=Variant.UNIVARIATE,
                         output_dir=str(tmp_path / "out"))
    report = run_pipeline(cfg)
    assert 0.45 <= report.feature_vector.h2 <= 0.55
    out = tmp_path / "out"
    for name in ("report.json", "fluctuation.tsv", "hurst.tsv", "tau.tsv", "spectrum.tsv",
                 "fluctuation.png", "hurst.png", "tau.png", "spectrum.png"):
        assert (out / name).stat().st_size > 0, name
    header, rows = read_tsv(out / "fluctuation.tsv")
    assert header == ["q", "s", "log10_s", "F", "log10_F"]
    vals = np.array([float(r[3]) for r in rows]).reshape(report.surface.values.shape)
    assert vals.tobytes() == report.surface.values.tobytes()
    d = read_json(out / "report.json")
    assert d["provenance"]["config_hash"] == cfg.config_hash()
    assert d["provenance"]["input_sha256"]


def test_identity_fm_equals_euclidean_report(tmp_path):
    x = gen_white_noise(4096, 3, seed=1)
    a = run_pipeline(replace(FAST, covariance=CovarianceEstimator(CovMode.IDENTITY), output_dir=str(tmp_path / "a")), x)
    b = run_pipeline(replace(FAST, variant=Variant.EUCLIDEAN, output_dir=str(tmp_path / "b")), x)
    sa = read_json(tmp_path / "a" / "report.json")["surface"]["values"]
    sb = read_json(tmp_path / "b" / "report.json")["surface"]["values"]
    assert sa == sb
    assert a.surface.values.tobytes() == b.surface.values.tobytes()


def test_stage_isolation():
    x = gen_white_noise(4096, 2, seed=4)
    direct = analyze_series(x, FAST)
    via = analyze_series(reconstruct_signal(ModeSet.from_components(x.samples[None]), 1), FAST)
    assert direct[0].values.tobytes() == via[0].values.tobytes()
    assert direct[2] == via[2]


def test_pipeline_with_mvmd_writes_modes(tmp_path):
    x = validate_series(gen_white_noise(2048, 2, seed=1).samples, 100.0)
    cfg = replace(FAST, mvmd=MvmdConfig(k_modes=3, max_iterations=30), output_dir=str(tmp_path))
    with pytest.warns(RuntimeWarning):
        r = run_pipeline(cfg, x)
    assert r.modes.k == 3 and 1 <= r.modes.k1_cutoff <= 2
    header, rows = read_tsv(tmp_path / "modes.tsv")
    assert header[:3] == ["mode", "omega_cycles_per_sample", "omega_hz"] and len(rows) == 3
    modes = read_json(tmp_path / "report.json")["modes"]
    np.testing.assert_allclose(modes["omegas_hz"], np.array(modes["omegas"]) * 100.0)


def test_k1_override():
    x = gen_white_noise(2048, 2, seed=1)
    cfg = replace(FAST, mvmd=MvmdConfig(k_modes=3, max_iterations=30), k1_override=2)
    with pytest.warns(RuntimeWarning):
        assert run_pipeline(cfg, x).modes.k1_cutoff == 2


def test_failure_marker(tmp_path):
    x = gen_white_noise(1024, 2, seed=1)
    cfg = replace(FAST, variant=Variant.UNIVARIATE, output_dir=str(tmp_path))
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, x)
    assert info.value.stage == "fluctuation"
    assert (tmp_path / FAILURE_MARKER).read_text().startswith("fluctuation\n")
    run_pipeline(replace(cfg, variant=Variant.MAHALANOBIS), x)
    assert not (tmp_path / FAILURE_MARKER).exists()


def test_missing_input_is_ingest_failure(tmp_path):
    with pytest.raises(StageError) as info:
        run_pipeline(PipelineConfig(input_path=str(tmp_path / "nope.csv"), output_dir=str(tmp_path / "o")))
    assert info.value.stage == "ingest"
    assert (tmp_path / "o" / FAILURE_MARKER).exists()


def test_config_hash_semantics():
    base = PipelineConfig(input_path="x.csv")
    assert base.config_hash() == replace(base, output_dir="elsewhere", plots=False).config_hash()
    for change in ({"seed": 1}, {"variant": Variant.EUCLIDEAN}, {"scales": (16, 512, 10)}, {"q": (-2, 2, 1)},
                   {"mvmd": None}, {"mvmd": MvmdConfig(k_modes=4)}, {"channels": ("a",)}, {"fit_range": (20, 400)}):
        assert replace(base, **change).config_hash() != base.config_hash(), change


def test_config_dict_round_trip():
    cfg = PipelineConfig(input_path="x", channels=("a", "b"), scales=(16, 256, 8), q=(-3.0, 3.0, 1.0),
                         covariance=CovarianceEstimator(CovMode.DIAGONAL), variant=Variant.EUCLIDEAN)
    back = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    with pytest.raises(MvFractalError):
        PipelineConfig.from_dict({"bogus": 1})


def test_flags_override_config_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 3, "variant": "mmfdfa", "detrend": {"order": 1, "mirrored": True},
                                "mvmd": {"k_modes": 5}}))
    args = parse_args(["analyze", "--config", str(conf), "--variant", "fm", "--k", "2",
                                      "--scales", "16:128:6", "--q", "-2:2:0.5", "--cov", "diag", "--input", "x.csv",
                                      "--channels", "AN3,AN4", "--detrend-order", "3", "--out", "o", "--seed", "9"])
    cfg = build_config(args)
    assert cfg.variant is Variant.MAHALANOBIS and cfg.mvmd.k_modes == 2 and cfg.seed == 9
    assert cfg.scales == (16, 128, 6) and cfg.q == (-2.0, 2.0, 0.5) and cfg.detrend.order == 3
    assert cfg.covariance.mode is CovMode.DIAGONAL and cfg.channels == ("AN3", "AN4")
    args = build_parser().parse_args(["analyze", "--config", str(conf), "--k", "0"])
    cfg = build_config(args)
    assert cfg.mvmd is None and cfg.seed == 3 and cfg.variant is Variant.EUCLIDEAN and cfg.detrend.order == 1


def test_bad_range_flag():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["analyze", "--scales", "16:64"])


def test_cli_end_to_end(tmp_path, capsys):
    reports = []
    for i, (w, cc) in enumerate([((0.55, 0.45), 0.6)] * 3 + [((0.7, 0.3), 0.2)] * 2):
        sig = tmp_path / f"s{i}.f64"
        assert main(["synth", "cascade", "--n", "4096", "--m", "3", "--seed", str(i), "--cross-corr", str(cc),
                     "--weights", ",".join(map(str, w)), "--out", str(sig)]) == 0
        out = tmp_path / f"r{i}"
        assert main(["analyze", "--input", str(sig), "--format", "raw64", "--k", "0", "--out", str(out),
                     "--no-plots"]) == 0
        reports.append(str(out / "report.json"))
    model = tmp_path / "model.json"
    assert main(["calibrate", "--healthy", *reports[:3], "--faulty", *reports[3:], "--policy", "midpoint",
                 "--out", str(model)]) == 0
    assert model.with_suffix(".png").exists()
    capsys.readouterr()
    assert main(["classify", "--model", str(model), *reports]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split("\t") == ["report", "distance", "threshold", "margin", "label"]
    assert [ln.split("\t")[-1] for ln in lines[1:]] == ["healthy"] * 3 + ["faulty"] * 2
    out = tmp_path / "with_model"
    assert main(["analyze", "--input", str(tmp_path / "s4.f64"), "--format", "raw64", "--k", "0",
                 "--model", str(model), "--out", str(out), "--no-plots"]) == 0
    assert read_json(out / "report.json")["decision"]["label"] == "faulty"


def test_cli_decompose(tmp_path, capsys):
    sig = tmp_path / "t.csv"
    assert main(["synth", "tones", "--n", "1000", "--rate", "1000", "--m", "2", "--format", "csv",
                 "--out", str(sig)]) == 0
    capsys.readouterr()
    assert main(["decompose", "--input", str(sig), "--k", "2", "--out", str(tmp_path / "d")]) == 0
    out = capsys.readouterr().out
    assert "k1\t" in out
    hz = [float(line.split("\t")[1]) for line in out.splitlines()[1:3]]
    np.testing.assert_allclose(hz, [50.0, 120.0], rtol=0.02)
    for name in ("modes.tsv", "modes.npy", "reconstructed.csv", "modes.png"):
        assert (tmp_path / "d" / name).exists()


def test_cli_error_exit(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "ingest" in capsys.readouterr().err
