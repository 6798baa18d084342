"""Dependency-free SVG scatter plots of 2-d embeddings."""

from __future__ import annotations

from html import escape

import numpy as np

# categorical palette (Tableau 10)
PALETTE = ["#4e79a7", "#e15759", "#59a14f", "#f28e2b", "#76b7b2",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"]
# continuous ramp endpoints, dark blue -> yellow
RAMP = [(0.0, (68, 1, 84)), (0.5, (33, 145, 140)), (1.0, (253, 231, 37))]


def _ramp(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(RAMP, RAMP[1:]):
        if t <= t1:
            f = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = [round(a + f * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % RAMP[-1][1]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def scatter_svg(x, y, color=None, kind: str = "categorical", title: str = "",
                xlabel: str = "dim1", ylabel: str = "dim2",
                width: int = 640, height: int = 480, radius: float = 2.5) -> str:
    """Render points as an SVG document string.

    ``kind="categorical"`` draws a legend of distinct colour values;
    ``kind="numeric"`` maps values onto a continuous ramp with a gradient bar.
    Output depends only on the inputs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    margin_l, margin_r, margin_t, margin_b = 60, 150, 40, 50
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b

    def scale(v):
        lo, hi = float(np.min(v)), float(np.max(v))
        span = hi - lo if hi > lo else 1.0
        return lo, span

    xlo, xspan = scale(x) if n else (0.0, 1.0)
    ylo, yspan = scale(y) if n else (0.0, 1.0)
    px = margin_l + (x - xlo) / xspan * pw
    py = margin_t + ph - (y - ylo) / yspan * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{escape(title)}</text>')
    parts.append(f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" '
                 'fill="none" stroke="#888"/>')
    parts.append(f'<text x="{margin_l + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{margin_t + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 {margin_t + ph / 2:.1f})">{escape(ylabel)}</text>')
    for v, pos in ((xlo, 0), (xlo + xspan, pw)):
        parts.append(f'<text x="{margin_l + pos}" y="{margin_t + ph + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
    for v, pos in ((ylo, ph), (ylo + yspan, 0)):
        parts.append(f'<text x="{margin_l - 6}" y="{margin_t + pos + 4}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{v:.3g}</text>')

    lx = margin_l + pw + 20
    if color is None:
        fills = ["#4e79a7"] * n
    elif kind == "numeric":
        c = np.asarray(color, dtype=float)
        lo, span = scale(c)
        fills = [_ramp((v - lo) / span) for v in c]
        stops = "".join(f'<stop offset="{t:.2f}" stop-color="{_ramp(t)}"/>' for t in np.linspace(0, 1, 5))
        parts.append(f'<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0">{stops}</linearGradient></defs>')
        parts.append(f'<rect class="legend-gradient" x="{lx}" y="{margin_t}" width="16" height="{ph / 2:.1f}" '
                     'fill="url(#ramp)" stroke="#888"/>')
        parts.append(f'<text x="{lx + 22}" y="{margin_t + 10}" font-family="sans-serif" '
                     f'font-size="10">{lo + span:.4g}</text>')
        parts.append(f'<text x="{lx + 22}" y="{margin_t + ph / 2:.1f}" font-family="sans-serif" '
                     f'font-size="10">{lo:.4g}</text>')
    else:
        cats = [str(v) for v in color]
        levels = sorted(set(cats))
        lookup = {lev: PALETTE[i % len(PALETTE)] for i, lev in enumerate(levels)}
        fills = [lookup[c] for c in cats]
        for i, lev in enumerate(levels):
            yy = margin_t + 8 + 16 * i
            parts.append(f'<rect class="legend-swatch" x="{lx}" y="{yy - 8}" width="10" height="10" '
                         f'fill="{lookup[lev]}"/>')
            parts.append(f'<text x="{lx + 16}" y="{yy + 1}" font-family="sans-serif" '
                         f'font-size="10">{escape(lev)}</text>')
    for cx, cy, f in zip(px, py, fills):
        parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{radius}" fill="{f}" fill-opacity="0.8"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
