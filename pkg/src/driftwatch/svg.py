"""Hand-built SVG line charts for monthly series (no plotting dependency)."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 960, 540
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 30, 50, 80
_ATTR = {'"': "&quot;"}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _nice_max(value: float) -> float:
    if value <= 0 or not math.isfinite(value):
        return 1.0
    exp = 10 ** math.floor(math.log10(value))
    for step in (1, 2, 2.5, 5, 10):
        if value <= step * exp:
            return step * exp
    return 10 * exp


def line_chart(
    labels: Sequence[str],
    series: Mapping[str, Sequence[float | None]],
    title: str = "",
    y_label: str = "",
) -> str:
    """Render one polyline per series over shared x labels (e.g. months).

    ``None`` or non-finite points are left out of the polyline. Output is a
    pure function of the inputs, so identical data gives identical bytes.
    """
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    finite = [v for vals in series.values() for v in vals if v is not None and math.isfinite(v)]
    y_max = _nice_max(max(finite, default=0.0))
    n = len(labels)

    def x_at(i: int) -> float:
        return MARGIN_LEFT + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def y_at(v: float) -> float:
        return MARGIN_TOP + plot_h * (1 - v / y_max)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>')
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    out.append(f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for k in range(6):
        v = y_max * k / 5
        y = y_at(v)
        out.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0 + plot_w}" y2="{y:.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    for i, lab in enumerate(labels):
        x = x_at(i)
        out.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(
            f'<text x="{x:.2f}" y="{y0 + 20}" text-anchor="end" '
            f'transform="rotate(-45 {x:.2f} {y0 + 20})">{escape(str(lab))}</text>'
        )
    if y_label:
        cy = MARGIN_TOP + plot_h / 2
        out.append(
            f'<text x="20" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 20 {cy:.1f})">{escape(y_label)}</text>'
        )
    for s, (name, vals) in enumerate(series.items()):
        color = COLORS[s % len(COLORS)]
        pts = " ".join(
            f"{x_at(i):.2f},{y_at(v):.2f}" for i, v in enumerate(vals) if v is not None and math.isfinite(v)
        )
        out.append(
            f'<polyline data-series="{escape(name, _ATTR)}" fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>'
        )
        out.append(
            f'<text x="{x0 + plot_w - 4}" y="{MARGIN_TOP + 16 * (s + 1)}" text-anchor="end" fill="{color}">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
