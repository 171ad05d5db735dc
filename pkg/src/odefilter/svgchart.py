"""Tiny log-log SVG chart writer. CSV is the canonical output; this is best-effort."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

__all__ = ["Series", "render_loglog"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 55


@dataclasses.dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color: Optional[str] = None
    dashed: bool = False


def render_loglog(
    path: str,
    series: Sequence[Series],
    guide_slopes: Sequence[float] = (),
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
) -> None:
    """Write a log-log chart of the given series with slope guide lines."""
    points = []
    for s in series:
        points.extend((x, y) for x, y in zip(s.x, s.y) if x > 0.0 and y > 0.0)
    if not points:
        points = [(1.0, 1.0), (10.0, 10.0)]
    lx = [math.log10(p[0]) for p in points]
    ly = [math.log10(p[1]) for p in points]
    x_lo, x_hi = math.floor(min(lx)), math.ceil(max(lx))
    y_lo, y_hi = math.floor(min(ly)), math.ceil(max(ly))
    if x_hi == x_lo:
        x_hi += 1
    if y_hi == y_lo:
        y_hi += 1

    def px(logx):
        return MARGIN_L + (logx - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    def py(logy):
        return HEIGHT - MARGIN_B - (logy - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
            f'font-size="14">{_esc(title)}</text>'
        )

    # Decade grid and tick labels.
    for dec in range(x_lo, x_hi + 1):
        x = px(dec)
        out.append(
            f'<line x1="{x:.1f}" y1="{MARGIN_T}" x2="{x:.1f}" y2="{HEIGHT - MARGIN_B}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.1f}" y="{HEIGHT - MARGIN_B + 16}" '
            f'text-anchor="middle">1e{dec}</text>'
        )
    for dec in range(y_lo, y_hi + 1):
        y = py(dec)
        out.append(
            f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{WIDTH - MARGIN_R}" y2="{y:.1f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.1f}" text-anchor="end">1e{dec}</text>')
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#333333"/>'
    )
    if xlabel:
        out.append(
            f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.1f}" y="{HEIGHT - 12}" '
            f'text-anchor="middle">{_esc(xlabel)}</text>'
        )
    if ylabel:
        x, y = 18, (MARGIN_T + HEIGHT - MARGIN_B) / 2
        out.append(
            f'<text x="{x}" y="{y:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 {x} {y:.1f})">{_esc(ylabel)}</text>'
        )

    # Guide lines through the upper-left corner of the data box.
    for slope in guide_slopes:
        y1 = max(ly)
        y2 = y1 + slope * (x_hi - min(lx))
        out.append(
            f'<line x1="{px(min(lx)):.1f}" y1="{py(min(y1, y_hi)):.1f}" '
            f'x2="{px(x_hi):.1f}" y2="{py(max(min(y2, y_hi), y_lo)):.1f}" '
            'stroke="#999999" stroke-width="1" stroke-dasharray="2,3"/>'
        )
        out.append(
            f'<text x="{px(x_hi) - 4:.1f}" y="{py(max(min(y2, y_hi), y_lo)) - 4:.1f}" '
            f'text-anchor="end" fill="#999999">slope {slope:g}</text>'
        )

    legend_y = MARGIN_T + 10
    for k, s in enumerate(series):
        color = s.color or _PALETTE[k % len(_PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        pts = " ".join(
            f"{px(math.log10(x)):.2f},{py(math.log10(y)):.2f}"
            for x, y in zip(s.x, s.y)
            if x > 0.0 and y > 0.0
        )
        if pts:
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"{dash}/>'
            )
        lx0 = WIDTH - MARGIN_R + 8
        out.append(
            f'<line x1="{lx0}" y1="{legend_y}" x2="{lx0 + 22}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="1.5"{dash}/>'
        )
        out.append(f'<text x="{lx0 + 27}" y="{legend_y + 4}">{_esc(s.label)}</text>')
        legend_y += 16
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
