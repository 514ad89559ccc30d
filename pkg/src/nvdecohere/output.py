"""Deterministic CSV tables and minimal SVG line plots."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptySeries

CSV_SCHEMAS = {
    "echo": ("total_time_us", "coherence", "std_err"),
    "fid": ("total_time_us", "coherence", "std_err"),
    "sweep-angle": ("theta_deg", "t2_us", "one_over_t2_per_us", "std_err", "included"),
    "sweep-field": ("b_gauss", "orientation", "t2_us", "std_err"),
    "cpmg": ("n_pulses", "t2_us", "std_err"),
    "validate-perturbation": ("b_gauss", "axis", "err_minus_mhz", "err_plus_mhz"),
    "suppression": ("b_gauss", "rms_parallel_mhz", "rms_perpendicular_mhz", "suppression_factor", "t2_ratio"),
}


def format_value(v) -> str:
    """Locale-independent rendering, 9 significant digits for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if v == 0:
        return "0"
    return np.format_float_positional(v, precision=9, unique=False, fractional=False, trim="-")


def render_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row {row!r} does not match header {header!r}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def emit_csv(schema: str, rows, path) -> Path:
    """Write ``rows`` under the fixed header of command ``schema``."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(CSV_SCHEMAS[schema], rows))
    return path


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray | None = None


_COLORS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#117a8b")
_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def _ticks(lo, hi, log):
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo - 1e-9 <= k <= hi + 1e-9]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def render_svg(series, axes="linear", title="", xlabel="", ylabel="") -> str:
    if not series:
        raise EmptySeries("no series to plot")
    for s in series:
        if len(s.x) < 2:
            raise EmptySeries(f"series {s.label!r} needs at least 2 points")
    log = axes == "log"

    def tx(v):
        return np.log10(v) if log else np.asarray(v, dtype=float)

    xs = np.concatenate([tx(s.x) for s in series])
    lows, highs = [], []
    for s in series:
        e = np.zeros(len(s.y)) if s.err is None else np.asarray(s.err, dtype=float)
        y = np.asarray(s.y, dtype=float)
        lo = y - e
        lows.append(tx(np.where(lo > 0, lo, y)) if log else lo)
        highs.append(tx(y + e))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(np.min(np.concatenate(lows))), float(np.max(np.concatenate(highs)))
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        return _ML + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _MT + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1, log):
        tv = np.log10(v) if log else v
        if not x0 - 1e-12 <= tv <= x1 + 1e-12:
            continue
        x = _fmt(px(tv))
        out.append(f'<line x1="{x}" y1="{_MT + ph}" x2="{x}" y2="{_MT + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{_MT + ph + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in _ticks(y0, y1, log):
        tv = np.log10(v) if log else v
        if not y0 - 1e-12 <= tv <= y1 + 1e-12:
            continue
        y = _fmt(py(tv))
        out.append(f'<line x1="{_ML - 5}" y1="{y}" x2="{_ML}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{_ML - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{_tick_label(v)}</text>')
    if title:
        out.append(f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{_ML + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{_MT + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_MT + ph / 2:.1f})">{escape(ylabel)}</text>'
        )
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        x = tx(s.x)
        y = tx(s.y)
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.err is not None:
            for a, yv, e in zip(x, np.asarray(s.y, float), np.asarray(s.err, float)):
                lo, hi = yv - e, yv + e
                if log:
                    lo = yv if lo <= 0 else lo
                    lo, hi = np.log10(lo), np.log10(hi)
                xa = _fmt(px(a))
                out.append(f'<line x1="{xa}" y1="{_fmt(py(lo))}" x2="{xa}" y2="{_fmt(py(hi))}" stroke="{color}"/>')
        for a, b in zip(x, y):
            out.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="2.5" fill="{color}"/>')
        ly = _MT + 14 + 16 * i
        out.append(f'<line x1="{_W - _MR - 150}" y1="{ly}" x2="{_W - _MR - 130}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR - 124}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series, path, axes="linear", title="", xlabel="", ylabel="") -> Path:
    path = Path(path)
    path.write_text(render_svg(series, axes, title, xlabel, ylabel), encoding="utf-8")
    return path
