"""CSV and SVG emission for sweep records."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .harness import SweepRecord, grid_means

__all__ = ["format_value", "emit_csv", "read_csv", "emit_svg"]

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.10g}"


def emit_csv(records: list[SweepRecord], path) -> Path:
    """One row per record in the fixed :class:`SweepRecord` field order."""
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    names = SweepRecord.field_names()
    rows = sorted(records, key=lambda r: (r.grid_value, r.seed))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for rec in rows:
            writer.writerow([format_value(getattr(rec, n)) for n in names])
    return path


def read_csv(path) -> list[SweepRecord]:
    types = {"seed": int, "cch_beneficial": lambda s: s == "true"}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(SweepRecord(**{k: types.get(k, float)(v) for k, v in row.items()}))
    return out


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def emit_svg(records: list[SweepRecord], path, y_columns, *, x_label: str = "grid value",
             y_label: str | None = None, title: str | None = None,
             width: int = 640, height: int = 420) -> Path:
    """Seed-averaged line plot of ``y_columns`` against the grid value."""
    y_columns = list(y_columns)
    if not y_columns:
        raise ValueError("at least one y column is required")
    if len({r.grid_value for r in records}) < 2:
        raise ValueError("a line plot needs at least two distinct grid values")
    series = {}
    for col in y_columns:
        if col not in SweepRecord.field_names() and col != "kd_benefit":
            raise ValueError(f"unknown column {col!r}")
        series[col] = grid_means(records, col)

    xs = series[y_columns[0]][0]
    all_y = np.concatenate([m[np.isfinite(m)] for _, m in series.values()])
    if all_y.size == 0:
        raise ValueError("no finite values to plot")
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    pad = 0.05 * (y_hi - y_lo or abs(y_hi) or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(xs.min()), float(xs.max())

    left, right, top, bottom = 80, 20, 40, 60
    legend_h = 18 * len(y_columns)
    pw, ph = width - left - right, height - top - bottom - legend_h

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + (1 - (y - y_lo) / (y_hi - y_lo)) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _nice_ticks(x_lo, x_hi):
        if x_lo <= t <= x_hi:
            x = sx(t)
            parts.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
            parts.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        if y_lo <= t <= y_hi:
            y = sy(t)
            parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
            parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
            parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{top + ph + 40}" text-anchor="middle">{escape(x_label)}</text>')
    ylab = y_label or ", ".join(y_columns)
    parts.append(f'<text transform="translate(18,{top + ph / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylab)}</text>')

    for i, col in enumerate(y_columns):
        color = _PALETTE[i % len(_PALETTE)]
        gx, gm = series[col]
        pts = [(sx(x), sy(y)) for x, y in zip(gx, gm) if np.isfinite(y)]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
        ly = top + ph + 50 + 18 * i
        parts.append(f'<line x1="{left}" y1="{ly}" x2="{left + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + 30}" y="{ly + 4}">{escape(col)}</text>')
    parts.append("</svg>")

    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
