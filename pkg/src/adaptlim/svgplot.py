"""Minimal native SVG line plots (no plotting dependency).

Emits stacked panels of polyline traces with axes, ticks, and a small
legend; enough to eyeball command tracking, surface positions, rates, and
deficiency histories from a run.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["plot_panels"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / max(n, 1)))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def plot_panels(path, t: np.ndarray, panels: list, title: str = "",
                width: int = 900, panel_height: int = 180) -> None:
    """Write stacked time-series panels to an SVG file.

    ``panels`` is a list of (ylabel, [(label, values), ...]) entries; every
    values array is plotted against the shared time axis.
    """
    t = np.asarray(t, dtype=float)
    margin_l, margin_r, margin_t, margin_b = 64, 16, 28, 34
    height = margin_t + len(panels) * (panel_height + 18) + margin_b
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" '
                     f'font-size="13">{title}</text>')
    t_lo, t_hi = float(t.min()), float(t.max())
    plot_w = width - margin_l - margin_r

    def sx(x):
        return margin_l + (x - t_lo) / max(t_hi - t_lo, 1e-30) * plot_w

    y0 = margin_t
    for ylabel, series in panels:
        finite = [np.asarray(v, dtype=float) for _, v in series]
        allv = np.concatenate([v[np.isfinite(v)] for v in finite]) \
            if finite else np.array([0.0])
        if allv.size == 0:
            allv = np.array([0.0])
        v_lo, v_hi = float(allv.min()), float(allv.max())
        if v_hi - v_lo < 1e-12:
            v_lo, v_hi = v_lo - 1.0, v_hi + 1.0
        pad = 0.05 * (v_hi - v_lo)
        v_lo, v_hi = v_lo - pad, v_hi + pad

        def sy(v):
            return y0 + panel_height - (v - v_lo) / (v_hi - v_lo) * panel_height

        parts.append(f'<rect x="{margin_l}" y="{y0}" width="{plot_w}" '
                     f'height="{panel_height}" fill="none" stroke="#888"/>')
        for tick in _ticks(v_lo, v_hi):
            yy = sy(tick)
            parts.append(f'<line x1="{margin_l}" y1="{yy:.1f}" '
                         f'x2="{margin_l + plot_w}" y2="{yy:.1f}" '
                         f'stroke="#eee"/>')
            parts.append(f'<text x="{margin_l - 6}" y="{yy + 3:.1f}" '
                         f'text-anchor="end">{_fmt(tick)}</text>')
        for i, (label, vals) in enumerate(series):
            vals = np.asarray(vals, dtype=float)
            color = _COLORS[i % len(_COLORS)]
            stride = max(1, len(t) // 1500)
            pts = " ".join(
                f"{sx(float(ti)):.1f},{sy(float(vi)):.1f}"
                for ti, vi in zip(t[::stride], vals[::stride])
                if math.isfinite(float(vi)))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.2"/>')
            parts.append(f'<text x="{margin_l + plot_w - 6}" '
                         f'y="{y0 + 14 + 13 * i}" text-anchor="end" '
                         f'fill="{color}">{label}</text>')
        parts.append(f'<text x="14" y="{y0 + panel_height / 2:.0f}" '
                     f'transform="rotate(-90 14 {y0 + panel_height / 2:.0f})" '
                     f'text-anchor="middle">{ylabel}</text>')
        y0 += panel_height + 18

    for tick in _ticks(t_lo, t_hi, 8):
        xx = sx(tick)
        parts.append(f'<text x="{xx:.1f}" y="{height - margin_b + 16}" '
                     f'text-anchor="middle">{_fmt(tick)}</text>')
    parts.append(f'<text x="{margin_l + plot_w / 2:.0f}" y="{height - 6}" '
                 f'text-anchor="middle">time (s)</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
