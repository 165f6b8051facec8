"""Minimal native SVG line plots (linear/log axes), no plotting dependency."""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 36, 52


def _ticks_linear(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out


def _ticks_log(lo: float, hi: float) -> List[float]:
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(lo_e, hi_e + 1)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


def line_plot(path: str, series: Sequence[Tuple[Sequence[float], Sequence[float], str]],
              title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False):
    """Write a line plot of (x, y, label) series to an SVG file."""
    xs_all = [float(x) for xs, _, _ in series for x in xs]
    ys_all = [float(y) for _, ys, _ in series for y in ys
              if math.isfinite(y) and (not logy or y > 0)]
    if not xs_all or not ys_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    if logx:
        xs_all = [x for x in xs_all if x > 0] or [1.0, 10.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x: float) -> float:
        if logx:
            t = (math.log10(x) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))
        else:
            t = (x - x_lo) / (x_hi - x_lo)
        return _ML + t * (_W - _ML - _MR)

    def sy(y: float) -> float:
        if logy:
            t = (math.log10(y) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
        else:
            t = (y - y_lo) / (y_hi - y_lo)
        return _H - _MB - t * (_H - _MT - _MB)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="11">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="13">{title}</text>']
    # axes
    parts.append(f'<line x1="{_ML}" y1="{_H-_MB}" x2="{_W-_MR}" y2="{_H-_MB}" '
                 'stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H-_MB}" stroke="black"/>')
    xticks = _ticks_log(x_lo, x_hi) if logx else _ticks_linear(x_lo, x_hi)
    yticks = _ticks_log(y_lo, y_hi) if logy else _ticks_linear(y_lo, y_hi)
    for t in xticks:
        if not (x_lo <= t <= x_hi):
            continue
        px = sx(t)
        parts.append(f'<line x1="{px}" y1="{_H-_MB}" x2="{px}" y2="{_H-_MB+5}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{px}" y="{_H-_MB+18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yticks:
        if not (y_lo <= t <= y_hi):
            continue
        py = sy(t)
        parts.append(f'<line x1="{_ML-5}" y1="{py}" x2="{_ML}" y2="{py}" stroke="black"/>')
        parts.append(f'<text x="{_ML-8}" y="{py+4}" text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<text x="{(_ML+_W-_MR)/2}" y="{_H-12}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(_MT+_H-_MB)/2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {(_MT+_H-_MB)/2})">{ylabel}</text>')
    for i, (xs, ys, label) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            pts.append(f"{sx(x):.2f},{sy(y):.2f}")
        if pts:
            parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W-_MR-6}" y="{_MT+14+14*i}" text-anchor="end" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
