"""Self-contained SVG line charts of a diagnostics column against t.

Output depends only on the input numbers: coordinates are printed with a
fixed number of decimals and no timestamps or ids are embedded.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .serialize import atomic_write, read_diagnostics

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 90, 20, 40, 50


def nice_ticks(lo, hi, count=5):
    """Round tick positions covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("non-finite axis range")
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        ticks.append(first + k * step)
        k += 1
    return ticks


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo <= 1e-14 * max(1.0, abs(lo), abs(hi)):
        pad = 0.5 * max(abs(lo), 1.0) * 1e-3
        return lo - pad, hi + pad
    return lo, hi


def svg_line_chart(x, y, title, xlabel="t", ylabel=""):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) == 0 or len(x) != len(y):
        raise ValueError("need matching, nonempty x and y")
    x0, x1 = _range(x)
    y0, y1 = _range(y)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for t in nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.3f}" y1="{TOP + ph}" x2="{X:.3f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{X:.3f}" y="{TOP + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:.6g}</text>'
        )
    for t in nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{Y:.3f}" x2="{LEFT}" y2="{Y:.3f}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 8}" y="{Y + 4:.3f}" text-anchor="end" font-family="sans-serif" font-size="11">{t:.10g}</text>'
        )
    out.append(
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(ylabel)}</text>'
    )
    pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(x, y))
    out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plot(csv_path, quantity, svg_path=None):
    cols = read_diagnostics(csv_path)
    if quantity not in cols or quantity == "t":
        raise KeyError(f"unknown diagnostics column {quantity!r}")
    svg = svg_line_chart(cols["t"], cols[quantity], f"{quantity} vs t", "t", quantity)
    if svg_path is not None:
        atomic_write(svg_path, svg)
    return svg
