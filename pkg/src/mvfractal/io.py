"""Reading and writing signals, plot tables and JSON documents."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ChannelNotFoundError, MvFractalError, ParseError, TruncatedRecordError
from .signals import (
    MultichannelSeries,
    default_labels,
    gen_cascade,
    gen_fgn,
    gen_tone_mix,
    gen_white_noise,
    validate_series,
)

TIME_COLUMNS = {"t", "time", "timestamp", "time_s"}
SIDECAR_SUFFIX = ".json"


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dump_json(obj))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _fmt(v, hex_floats: bool = False) -> str:
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return v.hex() if hex_floats else repr(v)


def write_tsv(path, header: Sequence[str], rows) -> Path:
    lines = ["\t".join(header)]
    lines.extend("\t".join(_fmt(v) for v in row) for row in rows)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_tsv(path) -> tuple[list, list]:
    with open(path, encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    return rows[0], rows[1:]


def _parse_float(tok: str, line: int) -> float:
    tok = tok.strip()
    try:
        return float(tok)
    except ValueError:
        pass
    try:
        return float.fromhex(tok)
    except ValueError:
        raise ParseError(line, f"not a number: {tok!r}") from None


def resolve_selection(labels: Sequence[str], selection) -> list[int]:
    """Column indices for a selection given as labels and/or integer indices."""
    if selection is None:
        return list(range(len(labels)))
    if isinstance(selection, str):
        selection = [s for s in selection.split(",") if s.strip()]
    out = []
    for item in selection:
        key = item.strip() if isinstance(item, str) else item
        if isinstance(key, str) and key in labels:
            out.append(labels.index(key))
            continue
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise ChannelNotFoundError(key) from None
        if not 0 <= idx < len(labels):
            raise ChannelNotFoundError(key)
        out.append(idx)
    return out


def read_csv_series(path, selection=None, sample_rate_hz: float | None = None) -> MultichannelSeries:
    """CSV with a header row of channel labels and one row per sample.

    A leading column named ``t``/``time`` is treated as the time axis: it is
    not a channel, and it sets the sample rate when none is given (otherwise
    a sidecar written by :func:`emit_synthetic` is consulted). Values
    may be decimal or hexadecimal float literals.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(1, "empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
            rows.append([_parse_float(c, lineno) for c in row])
    if not rows:
        raise ParseError(2, "no samples")
    data = np.array(rows, dtype=np.float64)
    time = None
    if header[0].lower() in TIME_COLUMNS:
        time = data[:, 0]
        data = data[:, 1:]
        header = header[1:]
    if sample_rate_hz is None:
        sample_rate_hz = (read_sidecar(path) or {}).get("sample_rate_hz", 1.0)
        if time is not None and time.size > 1:
            dt = float(np.median(np.diff(time)))
            if dt > 0:
                sample_rate_hz = 1.0 / dt
    cols = resolve_selection(header, selection)
    return validate_series(data[:, cols], sample_rate_hz, [header[c] for c in cols])


def read_sidecar(path) -> dict | None:
    side = Path(str(path) + SIDECAR_SUFFIX)
    return read_json(side) if side.exists() else None


def read_raw_f64(
    path,
    n_channels: int | None = None,
    sample_rate_hz: float | None = None,
    selection=None,
    labels: Sequence[str] | None = None,
) -> MultichannelSeries:
    """Channel-interleaved little-endian float64 samples.

    Channel count, rate and labels fall back to the sidecar metadata file
    written by :func:`emit_synthetic` when not passed explicitly.
    """
    meta = read_sidecar(path) or {}
    n_channels = n_channels or meta.get("n_channels")
    if not n_channels:
        raise MvFractalError("raw input needs a channel count (no sidecar found)")
    if sample_rate_hz is None:
        sample_rate_hz = meta.get("sample_rate_hz", 1.0)
    labels = labels or meta.get("channel_labels") or default_labels(n_channels)
    blob = Path(path).read_bytes()
    rec = 8 * n_channels
    if len(blob) % rec:
        raise TruncatedRecordError(f"{len(blob)} bytes is not a whole number of {n_channels}-channel records")
    data = np.frombuffer(blob, dtype="<f8").reshape(-1, n_channels)
    cols = resolve_selection(list(labels), selection)
    return validate_series(data[:, cols], sample_rate_hz, [labels[c] for c in cols])


def ingest(path, fmt: str = "csv", selection=None, sample_rate_hz: float | None = None, n_channels: int | None = None):
    if fmt == "csv":
        return read_csv_series(path, selection, sample_rate_hz)
    if fmt in ("raw64", "raw"):
        return read_raw_f64(path, n_channels, sample_rate_hz, selection)
    raise MvFractalError(f"unknown input format {fmt!r}")


def write_csv_series(series: MultichannelSeries, path, hex_floats: bool = False) -> Path:
    lines = [",".join(series.channel_labels)]
    lines.extend(",".join(_fmt(v, hex_floats) for v in row) for row in series.samples)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_raw_f64(series: MultichannelSeries, path) -> Path:
    return atomic_write_bytes(path, np.ascontiguousarray(series.samples, dtype="<f8").tobytes())


def write_series(series: MultichannelSeries, path, fmt: str = "csv", hex_floats: bool = False) -> Path:
    if fmt == "csv":
        return write_csv_series(series, path, hex_floats)
    if fmt in ("raw64", "raw"):
        return write_raw_f64(series, path)
    raise MvFractalError(f"unknown output format {fmt!r}")


SYNTH_KINDS = ("white", "fgn", "cascade", "tones")


def synthesize(kind: str, params: dict) -> MultichannelSeries:
    p = dict(params)
    if kind == "white":
        return gen_white_noise(p["n"], p.get("m", 1), p.get("seed", 0), p.get("sample_rate_hz", 1.0))
    if kind == "fgn":
        return gen_fgn(p["n"], p.get("m", 1), p.get("hurst", 0.5), p.get("cross_corr", 0.0), p.get("seed", 0),
                       p.get("sample_rate_hz", 1.0))
    if kind == "cascade":
        return gen_cascade(p["n"], tuple(p.get("weights", (0.6, 0.4))), p.get("m", 1), p.get("cross_corr", 0.0),
                           p.get("seed"), p.get("sample_rate_hz", 1.0))
    if kind == "tones":
        return gen_tone_mix(p["n"], p.get("sample_rate_hz", 1.0), p["freqs_hz"], p.get("amplitudes"),
                            p.get("phases"), p.get("m", 1), p.get("noise_std", 0.0), p.get("seed", 0))
    raise MvFractalError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")


def emit_synthetic(kind: str, params: dict, path, fmt: str = "raw64", hex_floats: bool = True) -> Path:
    """Generate a benchmark signal, write it, and record its parameters in ``<path>.json``."""
    series = synthesize(kind, params)
    write_series(series, path, fmt, hex_floats)
    meta = {
        "kind": kind,
        "params": params,
        "format": fmt,
        "hex_floats": bool(hex_floats) if fmt == "csv" else None,
        "n_samples": series.n_samples,
        "n_channels": series.n_channels,
        "sample_rate_hz": series.sample_rate_hz,
        "channel_labels": list(series.channel_labels),
    }
    write_json(str(path) + SIDECAR_SUFFIX, meta)
    return Path(path)
