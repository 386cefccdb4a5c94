"""Tiny dependency-free SVG line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 320
MARGIN = 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_plot(
    curves: list[tuple[str, list[float], list[float]]],
    x_label: str,
    y_label: str,
    title: str = "",
) -> str:
    """One polyline per ``(name, xs, ys)``; non-finite points are dropped."""
    finite = [(x, y) for _, xs, ys in curves for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    if finite:
        x_lo, x_hi = min(p[0] for p in finite), max(p[0] for p in finite)
        y_lo, y_hi = min(p[1] for p in finite), max(p[1] for p in finite)
    else:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(x_label)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(y_label)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10">{x_lo:.3g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10" text-anchor="end">{x_hi:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" font-size="10" text-anchor="end">{y_hi:.3g}</text>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, (name, xs, ys) in enumerate(curves):
        pts = " ".join(
            f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)
        )
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}">'
                   f"<title>{escape(name)}</title></polyline>")
        out.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * (i + 1)}" font-size="10" '
                   f'fill="{colour}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
