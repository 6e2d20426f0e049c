"""
CSV artifacts with a ``#`` metadata header and a JSON sidecar.

Every table starts with ``# key: value`` lines (values JSON-encoded), then
one header row, then data. ``<file>.json`` repeats the metadata for tools
that cannot read comment lines.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .detection import ClickStream, Histogram
from .emitter import LINE_CODE, LINES, PhotonStream

STREAM_HEADER = ("time_ps", "line", "wavelength_nm")
CLICK_HEADER = ("channel", "time_ps")
LINESET_HEADER = ("label", "center_nm", "fwhm_uev", "intensity")
LIFETIME_HEADER = ("T_K", "tau_ns")
WAVEGUIDE_HEADER = ("diameter_nm", "wavelength_nm", "n_eff", "confinement", "F_rel")
FIT_HEADER = ("T_K", "power_ratio", "g2_zero", "background", "lifetime_ns", "residual")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def write_table(path, header, rows, meta: dict | None = None, sidecar: bool = True) -> Path:
    """Write rows under ``header``; floats use the shortest exact repr."""
    path = Path(path)
    meta = dict(meta or {})
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}: {json.dumps(meta[k], sort_keys=True, default=_json_default)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    if sidecar:
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1, default=_json_default)
            fh.write("\n")
    return path


def read_table(path):
    """Return (meta, header, rows) with rows as lists of strings."""
    meta, rows, header = {}, [], None
    with open(path, newline="") as fh:
        body = []
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                meta[key.strip()] = json.loads(val)
            else:
                body.append(line)
    reader = csv.reader(body)
    for row in reader:
        if header is None:
            header = tuple(row)
        elif row:
            rows.append(row)
    if header is None:
        raise ValueError(f"{path}: no header row")
    return meta, header, rows


def _expect(header, want, path):
    if tuple(header) != tuple(want):
        raise ValueError(f"{path}: expected columns {','.join(want)}, got {','.join(header)}")


def write_stream(path, stream: PhotonStream) -> Path:
    rows = zip(stream.time_ps.tolist(), (LINES[c] for c in stream.line),
               stream.wavelength_nm.tolist())
    return write_table(path, STREAM_HEADER, rows, stream.meta)


def read_stream(path) -> PhotonStream:
    meta, header, rows = read_table(path)
    _expect(header, STREAM_HEADER, path)
    t = np.array([float(r[0]) for r in rows])
    line = np.array([LINE_CODE[r[1]] for r in rows], dtype=np.int8)
    lam = np.array([float(r[2]) for r in rows])
    return PhotonStream(t, line, lam, meta)


def write_clicks(path, streams, meta: dict | None = None) -> Path:
    rows = []
    for s in streams:
        rows.extend((s.channel, t) for t in s.times.tolist())
    rows.sort(key=lambda r: (r[1], r[0]))
    return write_table(path, CLICK_HEADER, rows, meta or streams[0].meta)


def read_clicks(path):
    """Return one ClickStream per channel, ordered by channel index."""
    meta, header, rows = read_table(path)
    _expect(header, CLICK_HEADER, path)
    ch = np.array([int(r[0]) for r in rows], dtype=int)
    t = np.array([float(r[1]) for r in rows])
    return [ClickStream(int(c), t[ch == c], dict(meta)) for c in sorted(set(ch.tolist()) | {0, 1})]


def write_histogram(path, hist: Histogram, meta: dict | None = None) -> Path:
    header = ("tau_ps", "counts") if hist.kind == "coincidence" else ("t_ps", "counts")
    m = dict(hist.meta)
    m.update(meta or {})
    m.update(bin_width=hist.bin_width, origin=hist.origin, kind=hist.kind)
    return write_table(path, header, zip(hist.centers.tolist(), hist.counts.tolist()), m)


def read_histogram(path) -> Histogram:
    meta, header, rows = read_table(path)
    kind = "coincidence" if header[0] == "tau_ps" else "decay"
    counts = np.array([int(float(r[1])) for r in rows], dtype=np.int64)
    bw = float(meta.get("bin_width", float(rows[1][0]) - float(rows[0][0])))
    origin = float(meta.get("origin", float(rows[0][0]) - bw / 2))
    extra = {k: v for k, v in meta.items() if k not in ("bin_width", "origin", "kind")}
    return Histogram(bw, origin, counts, kind, extra)
