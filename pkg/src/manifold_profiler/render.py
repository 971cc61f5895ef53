"""Static SVG charts (800 x 500), byte-stable for identical input."""

from __future__ import annotations

import numpy as np

from .errors import ProfilerError, ValidationError
from .profile import detect_peak

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 70, 30, 40, 60


def _n(v):
    return f"{v:.2f}"


def _esc(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Canvas:
    def __init__(self, title, xlim, ylim, xlabel, ylabel):
        self.parts = []
        self.xlim = xlim
        self.ylim = ylim
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">'
        )
        self.parts.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
        self.parts.append(f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="15">{_esc(title)}</text>')
        self._axes(xlabel, ylabel)

    def x(self, v):
        lo, hi = self.xlim
        return LEFT + (v - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)

    def y(self, v):
        lo, hi = self.ylim
        return HEIGHT - BOTTOM - (v - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)

    def _axes(self, xlabel, ylabel):
        x0, x1 = LEFT, WIDTH - RIGHT
        y0, y1 = HEIGHT - BOTTOM, TOP
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
        for t in np.linspace(*self.xlim, 6):
            px = _n(self.x(t))
            self.parts.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
            self.parts.append(f'<text x="{px}" y="{y0 + 18}" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(*self.ylim, 6):
            py = _n(self.y(t))
            self.parts.append(f'<line x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
            self.parts.append(f'<text x="{x0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">{t:.3g}</text>')
        self.parts.append(f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 18}" text-anchor="middle">{_esc(xlabel)}</text>')
        self.parts.append(
            f'<text x="18" y="{(y0 + y1) // 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {(y0 + y1) // 2})">{_esc(ylabel)}</text>'
        )

    def add(self, element):
        self.parts.append(element)

    def svg(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _limits(values, pad=0.05):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    margin = (hi - lo) * pad
    return lo - margin, hi + margin


def profile_svg(layers, values, sd=None, title="ID profile", ylabel="ID", smooth=False) -> str:
    layers = np.asarray(layers, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(layers) == 0:
        raise ValidationError("empty profile")
    band = values if sd is None else np.concatenate([values - sd, values + sd])
    c = _Canvas(title, _limits(layers, 0.02), _limits(band), "layer", ylabel)
    try:
        span = detect_peak(values, smooth=smooth)
    except ProfilerError:
        span = None
    if span is not None:
        xa, xb = c.x(layers[span.onset]), c.x(layers[span.end])
        c.add(
            f'<rect class="peak" x="{_n(xa)}" y="{TOP}" width="{_n(xb - xa)}" '
            f'height="{HEIGHT - TOP - BOTTOM}" fill="orange" fill-opacity="0.25"/>'
        )
    if sd is not None:
        upper = [f"{_n(c.x(a))},{_n(c.y(v))}" for a, v in zip(layers, values + sd)]
        lower = [f"{_n(c.x(a))},{_n(c.y(v))}" for a, v in zip(layers[::-1], (values - sd)[::-1])]
        c.add(f'<polygon points="{" ".join(upper + lower)}" fill="steelblue" fill-opacity="0.2"/>')
    pts = " ".join(f"{_n(c.x(a))},{_n(c.y(v))}" for a, v in zip(layers, values))
    c.add(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for a, v in zip(layers, values):
        c.add(f'<circle cx="{_n(c.x(a))}" cy="{_n(c.y(v))}" r="3" fill="steelblue"/>')
    return c.svg()


def scatter_svg(x, y, xlabel="x", ylabel="y", title="scatter", labels=None) -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0:
        raise ValidationError("empty scatter")
    c = _Canvas(title, _limits(x), _limits(y), xlabel, ylabel)
    for i, (a, b) in enumerate(zip(x, y)):
        c.add(f'<circle cx="{_n(c.x(a))}" cy="{_n(c.y(b))}" r="4" fill="firebrick"/>')
        if labels is not None:
            c.add(f'<text x="{_n(c.x(a) + 6)}" y="{_n(c.y(b) - 6)}" font-size="10">{_esc(labels[i])}</text>')
    return c.svg()


def grid_svg(rows_a, rows_b, values, xlabel="layer_b", ylabel="layer_a", title="grid") -> str:
    """Heat map; darker cells are larger values."""
    a_keys = sorted(set(rows_a))
    b_keys = sorted(set(rows_b))
    if not a_keys or not b_keys:
        raise ValidationError("empty grid")
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    scale = (hi - lo) or 1.0
    c = _Canvas(title, (-0.5, len(b_keys) - 0.5), (-0.5, len(a_keys) - 0.5), xlabel, ylabel)
    cw = (WIDTH - LEFT - RIGHT) / len(b_keys)
    ch = (HEIGHT - TOP - BOTTOM) / len(a_keys)
    ai = {k: i for i, k in enumerate(a_keys)}
    bi = {k: j for j, k in enumerate(b_keys)}
    for a, b, v in zip(rows_a, rows_b, values):
        shade = int(round(255 * (1.0 - (v - lo) / scale)))
        x = c.x(bi[b] - 0.5)
        y = c.y(ai[a] + 0.5)
        c.add(
            f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(cw)}" height="{_n(ch)}" '
            f'fill="rgb({shade},{shade},255)"/>'
        )
    return c.svg()
