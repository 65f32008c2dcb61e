"""Static SVG plots: predictions against truth, and inclusion heatmaps.

Output is plain text with fixed number formatting, so identical inputs give
byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .nowcast import Traceplot
from .timeseries import WeekStamp

PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def line_chart(path, series: Mapping[str, Mapping[WeekStamp, float]], title: str = "",
               width: int = 900, height: int = 360) -> None:
    """One polyline per series over a shared week axis (first series drawn first)."""
    pad_l, pad_r, pad_t, pad_b = 50, 130, 30, 30
    weeks = sorted({w for s in series.values() for w in s})
    if not weeks:
        raise ValueError("nothing to plot")
    vals = np.array([v for s in series.values() for v in s.values()], dtype=float)
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    x0 = weeks[0].ordinal
    span = max(weeks[-1].ordinal - x0, 1)
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(w, v):
        return (pad_l + pw * (w.ordinal - x0) / span, pad_t + ph * (1 - (v - lo) / (hi - lo)))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>']
    if title:
        out.append(f'<text x="{pad_l}" y="18" font-size="13">{escape(title)}</text>')
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        y = pad_t + ph * (1 - frac)
        out.append(f'<text x="4" y="{_f(y + 4)}" font-size="10">{v:.2f}</text>')
    out.append(f'<text x="{pad_l}" y="{height - 8}" font-size="10">{weeks[0]}</text>')
    out.append(f'<text x="{pad_l + pw - 60}" y="{height - 8}" font-size="10">{weeks[-1]}</text>')
    for k, (label, s) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (xy(w, s[w]) for w in sorted(s)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = pad_t + 14 * (k + 1)
        out.append(f'<line x1="{width - pad_r + 10}" y1="{ly - 4}" x2="{width - pad_r + 30}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r + 35}" y="{ly}" font-size="11">{escape(label)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(path, tp: Traceplot, cell: float = 4.0, label_every: int = 52) -> None:
    """Weeks down, predictors across; dark = included, light = available, blank = not yet usable.

    Group bands are outlined and labelled by group id.
    """
    n_w, n_c = tp.included.shape
    left, top = 70, 30
    width = int(left + n_c * cell + 10)
    height = int(top + n_w * cell + 10)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    for i in range(n_w):
        y = top + i * cell
        if label_every and i % label_every == 0:
            out.append(f'<text x="2" y="{_f(y + cell)}" font-size="9">{tp.weeks[i]}</text>')
        for j in range(n_c):
            if not tp.available[i, j]:
                continue
            color = "#08306b" if tp.included[i, j] else "#deebf7"
            out.append(f'<rect x="{_f(left + j * cell)}" y="{_f(y)}" width="{_f(cell)}" '
                       f'height="{_f(cell)}" fill="{color}"/>')
    for gid, a, b in tp.bands:
        out.append(f'<rect x="{_f(left + a * cell)}" y="{top}" width="{_f((b - a) * cell)}" '
                   f'height="{_f(n_w * cell)}" fill="none" stroke="#d62728" stroke-width="0.5"/>')
        out.append(f'<text x="{_f(left + a * cell)}" y="{top - 4}" font-size="8">{gid}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def series_from_runs(runs: Sequence, truth: Mapping[WeekStamp, float] | None = None
                     ) -> dict[str, dict[WeekStamp, float]]:
    """Truth (restricted to the runs' weeks) followed by each run, keyed by label."""
    out = {}
    if truth:
        covered = {w for r in runs for w in r.weeks}
        out["truth"] = {w: v for w, v in truth.items() if w in covered and not np.isnan(v)}
    for r in runs:
        out[r.label] = r.as_dict()
    return out
