"""CSV, JSON and SVG emission plus the run manifest.

Floats are written with ``repr``, the shortest text that parses back to
the same double.
"""

import csv
from datetime import datetime, timezone
import hashlib
import io
import json
import math
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import FracOUError

MANIFEST = "manifest.json"


class OutputError(FracOUError, OSError):
    """A result file could not be written."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def jsonable(obj):
    """Recursively convert to JSON-safe values; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _ensure_dir(out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc


def _write_bytes(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def json_bytes(obj) -> bytes:
    return (json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


def write_csv(out_dir, name, header, rows) -> str:
    _ensure_dir(out_dir)
    path = os.path.join(out_dir, name)
    _write_bytes(path, csv_bytes(header, rows))
    return path


def write_json(out_dir, name, obj) -> str:
    _ensure_dir(out_dir)
    path = os.path.join(out_dir, name)
    _write_bytes(path, json_bytes(obj))
    return path


def write_text(out_dir, name, text) -> str:
    _ensure_dir(out_dir)
    path = os.path.join(out_dir, name)
    _write_bytes(path, text.encode("utf-8"))
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 16), b""):
                h.update(block)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from exc
    return h.hexdigest()


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, outputs: List[str], config_snapshot: dict, started: str,
                   version: str, extra: Optional[dict] = None) -> str:
    """Write ``manifest.json`` listing every output with its sha256."""
    files = []
    for path in outputs:
        files.append({"path": os.path.relpath(path, out_dir), "sha256": sha256_file(path),
                      "bytes": os.path.getsize(path)})
    manifest = {"artifact_version": version, "started": started, "finished": now_utc(),
                "config": config_snapshot, "outputs": files}
    if extra:
        manifest.update(extra)
    return write_json(out_dir, MANIFEST, manifest)


# -- rate reports ----------------------------------------------------------

RATE_POINT_COLUMNS = ["n", "d_kol_hat", "dkw_halfwidth", "at_noise_floor", "M", "sigma1_sq",
                      "mean", "mean_stderr"]


def rate_point_rows(report):
    for p in report.points:
        yield [p.n, p.d_kol_hat, p.dkw_halfwidth, p.at_noise_floor, p.M, p.sigma1_sq, p.mean,
               p.mean_stderr]


def _nice_log_ticks(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(a, b + 1)]


def rate_svg(report, width=640, height=440) -> str:
    """Log-log plot of the Kolmogorov distances with the fitted line and a
    reference line of the theoretical slope through the data's centroid."""
    pts = [(p.n, p.d_kol_hat, p.at_noise_floor) for p in report.points if p.d_kol_hat > 0]
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if not pts:
        out.append(f'<text x="{width / 2}" y="{height / 2}" text-anchor="middle">no data</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
    ns = [p[0] for p in pts]
    ds = [p[1] for p in pts]
    x0, x1 = math.log10(min(ns)) - 0.1, math.log10(max(ns)) + 0.1
    y0, y1 = math.log10(min(ds)) - 0.15, math.log10(max(ds)) + 0.15

    def X(n):
        return ml + (math.log10(n) - x0) / (x1 - x0) * pw

    def Y(d):
        return mt + (y1 - math.log10(d)) / (y1 - y0) * ph

    def f(v):
        return f"{v:.2f}"

    axis = f"M{f(ml)},{f(mt)} L{f(ml)},{f(mt + ph)} L{f(ml + pw)},{f(mt + ph)}"
    out.append(f'<path class="axes" d="{axis}" stroke="black" fill="none"/>')
    ticks = []
    labels = []
    for n in [2 ** k for k in range(0, 40) if 10 ** x0 <= 2 ** k <= 10 ** x1]:
        ticks.append(f"M{f(X(n))},{f(mt + ph)} L{f(X(n))},{f(mt + ph + 5)}")
        labels.append(f'<text x="{f(X(n))}" y="{f(mt + ph + 20)}" text-anchor="middle" '
                      f'font-size="11">{n}</text>')
    for d in _nice_log_ticks(10 ** y0, 10 ** y1):
        for m in (1, 2, 5):
            v = d * m
            if 10 ** y0 <= v <= 10 ** y1:
                ticks.append(f"M{f(ml - 5)},{f(Y(v))} L{f(ml)},{f(Y(v))}")
                labels.append(f'<text x="{f(ml - 8)}" y="{f(Y(v) + 4)}" text-anchor="end" '
                              f'font-size="11">{v:g}</text>')
    if ticks:
        out.append(f'<path class="ticks" d="{" ".join(ticks)}" stroke="black" fill="none"/>')
    out.extend(labels)
    out.append(f'<text x="{f(ml + pw / 2)}" y="{height - 10}" text-anchor="middle" '
               f'font-size="12">n</text>')
    out.append(f'<text x="15" y="{f(mt + ph / 2)}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 15 {f(mt + ph / 2)})">Kolmogorov distance</text>')
    lx = [math.log10(n) for n in ns]
    ly = [math.log10(d) for d in ds]
    cx, cy = sum(lx) / len(lx), sum(ly) / len(ly)
    lo_n, hi_n = min(ns), max(ns)

    def through(slope):
        a = 10 ** (cy + slope * (math.log10(lo_n) - cx))
        b = 10 ** (cy + slope * (math.log10(hi_n) - cx))
        return X(lo_n), Y(a), X(hi_n), Y(b)

    if math.isfinite(report.slope):
        fit_slope = report.slope
    elif len(pts) >= 2:
        # no accepted fit: show the plain least-squares line through every point
        fit_slope = float(np.polyfit(lx, ly, 1)[0])
    else:
        fit_slope = 0.0
    if math.isfinite(report.slope):
        kept = [(math.log10(n), math.log10(d)) for n, d, floor in pts if not floor]
        kx = sum(a for a, _ in kept) / len(kept)
        ky = sum(b for _, b in kept) / len(kept)
        cx, cy = kx, ky
    xa, ya, xb, yb = through(fit_slope)
    out.append(f'<line class="fit-line" x1="{f(xa)}" y1="{f(ya)}" x2="{f(xb)}" y2="{f(yb)}" '
               f'stroke="#1f77b4" stroke-width="2"/>')
    xa, ya, xb, yb = through(report.exponent)
    out.append(f'<line class="theory-line" x1="{f(xa)}" y1="{f(ya)}" x2="{f(xb)}" y2="{f(yb)}" '
               f'stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4"/>')
    out.append('<g class="points">')
    for n, d, floor in pts:
        fill = "white" if floor else "black"
        out.append(f'<circle cx="{f(X(n))}" cy="{f(Y(d))}" r="4" stroke="black" fill="{fill}"/>')
    out.append("</g>")
    out.append(f'<text x="{f(ml + 10)}" y="{f(mt - 10)}" font-size="12">slope {report.slope:.3f}, '
               f'theory {report.exponent:.3f}, {report.verdict}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
