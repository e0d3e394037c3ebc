"""Dependency-free SVG rendering of the log-log counting plot.

Fixed 800x600 viewbox with decade ticks on both axes; the data points
are circles, and exactly two straight guide lines are drawn: the fitted
slope and the predicted slope.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

WIDTH, HEIGHT = 800, 600
MARGIN = 60


def _log_mapper(lo: float, hi: float, out_lo: float, out_hi: float):
    llo, lhi = math.log10(lo), math.log10(hi)
    span = lhi - llo if lhi > llo else 1.0

    def to_px(v: float) -> float:
        return out_lo + (math.log10(v) - llo) / span * (out_hi - out_lo)

    return to_px, llo, lhi


def render_loglog(
    points: Sequence[tuple[float, float]],
    fit_slope: float,
    fit_intercept: float,
    guide_slope: float,
    title: str = "",
    header_comment: Optional[str] = None,
) -> str:
    """Scatter of (x, N) with the fitted line and a predicted-slope guide line.

    The guide line is anchored at the geometric center of the fitted line
    so the two are visually comparable.
    """
    pts = [(x, y) for x, y in points if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot: no positive samples")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_px, lx0, lx1 = _log_mapper(min(xs), max(xs), MARGIN, WIDTH - MARGIN)
    y_px, ly0, ly1 = _log_mapper(min(ys), max(ys), HEIGHT - MARGIN, MARGIN)

    out = []
    if header_comment:
        out.append(f"<!-- {header_comment} -->")
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">'
    )
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    axis = (
        f"M {MARGIN} {MARGIN} L {MARGIN} {HEIGHT - MARGIN} "
        f"L {WIDTH - MARGIN} {HEIGHT - MARGIN}"
    )
    ticks = []
    for d in range(math.ceil(lx0), math.floor(lx1) + 1):
        px = x_px(10.0 ** d)
        ticks.append(f"M {px:.2f} {HEIGHT - MARGIN} l 0 6")
        out.append(
            f'<text x="{px:.2f}" y="{HEIGHT - MARGIN + 22}" font-size="12" '
            f'text-anchor="middle">1e{d}</text>'
        )
    for d in range(math.ceil(ly0), math.floor(ly1) + 1):
        py = y_px(10.0 ** d)
        ticks.append(f"M {MARGIN} {py:.2f} l -6 0")
        out.append(
            f'<text x="{MARGIN - 10}" y="{py + 4:.2f}" font-size="12" '
            f'text-anchor="end">1e{d}</text>'
        )
    out.append(f'<path d="{axis}" stroke="black" fill="none"/>')
    if ticks:
        out.append(f'<path d="{" ".join(ticks)}" stroke="black" fill="none"/>')
    if title:
        out.append(
            f'<text x="{WIDTH / 2}" y="30" font-size="15" text-anchor="middle">{title}</text>'
        )

    for x, y in pts:
        out.append(
            f'<circle cx="{x_px(x):.2f}" cy="{y_px(y):.2f}" r="3" fill="steelblue"/>'
        )

    t0, t1 = math.log(min(xs)), math.log(max(xs))
    fit_y0 = math.exp(fit_intercept + fit_slope * t0)
    fit_y1 = math.exp(fit_intercept + fit_slope * t1)
    out.append(
        f'<line x1="{x_px(min(xs)):.2f}" y1="{y_px(fit_y0):.2f}" '
        f'x2="{x_px(max(xs)):.2f}" y2="{y_px(fit_y1):.2f}" '
        f'stroke="crimson" stroke-width="1.5"/>'
    )
    tc = 0.5 * (t0 + t1)
    yc = fit_intercept + fit_slope * tc
    g_y0 = math.exp(yc + guide_slope * (t0 - tc))
    g_y1 = math.exp(yc + guide_slope * (t1 - tc))
    out.append(
        f'<line x1="{x_px(min(xs)):.2f}" y1="{y_px(g_y0):.2f}" '
        f'x2="{x_px(max(xs)):.2f}" y2="{y_px(g_y1):.2f}" '
        f'stroke="seagreen" stroke-width="1.5" stroke-dasharray="6 4"/>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
