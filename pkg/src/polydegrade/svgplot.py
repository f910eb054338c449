"""Minimal deterministic SVG line charts.

Charts are plain strings built from the data alone: no timestamps, no
random ids, no library state. Equal inputs give byte-identical files,
which the report exporter relies on.
"""

from __future__ import annotations

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH = 640
_HEIGHT = 440
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 24
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 52


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _tick_label(value: float) -> str:
    return f"{value:g}"


def line_chart(
    series: list[tuple[str, list[tuple[float, float]]]],
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    y_range: tuple[float, float] | None = None,
) -> str:
    """Render labelled (x, y) series as an SVG line chart with point markers."""
    points = [p for _, pts in series for p in pts]
    if not points:
        raise ValueError("line_chart needs at least one data point")
    xs = sorted({x for x, _ in points})
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_vals = [y for _, y in points]
        y_lo, y_hi = min(y_vals), max(y_vals)
        pad = (y_hi - y_lo) * 0.05 or 1.0
        y_lo, y_hi = y_lo - pad, y_hi + pad
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return _MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{_WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>'
        )
    frame_bottom = _MARGIN_TOP + plot_h
    out.append(
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444"/>'
    )
    x_ticks = xs if len(xs) <= 12 else [x_lo + (x_hi - x_lo) * i / 5 for i in range(6)]
    for x in x_ticks:
        px = sx(x)
        out.append(
            f'<line x1="{_fmt(px)}" y1="{frame_bottom}" x2="{_fmt(px)}" y2="{frame_bottom + 5}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_fmt(px)}" y="{frame_bottom + 18}" text-anchor="middle">{_tick_label(x)}</text>'
        )
    for i in range(6):
        y = y_lo + (y_hi - y_lo) * i / 5
        py = sy(y)
        out.append(
            f'<line x1="{_MARGIN_LEFT - 5}" y1="{_fmt(py)}" x2="{_MARGIN_LEFT}" y2="{_fmt(py)}" stroke="#444"/>'
        )
        out.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{_fmt(py)}" x2="{_MARGIN_LEFT + plot_w}" y2="{_fmt(py)}" '
            f'stroke="#ddd" stroke-dasharray="3,3"/>'
        )
        out.append(
            f'<text x="{_MARGIN_LEFT - 8}" y="{_fmt(py + 4)}" text-anchor="end">{_tick_label(y)}</text>'
        )
    if x_label:
        out.append(
            f'<text x="{_MARGIN_LEFT + plot_w / 2:.0f}" y="{_HEIGHT - 12}" text-anchor="middle">{x_label}</text>'
        )
    if y_label:
        cy = _MARGIN_TOP + plot_h / 2
        out.append(
            f'<text x="16" y="{cy:.0f}" text-anchor="middle" transform="rotate(-90 16 {cy:.0f})">{y_label}</text>'
        )
    for idx, (label, pts) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        ordered = sorted(pts)
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in ordered)
        out.append(f'<g data-series="{label}">')
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in ordered:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        legend_y = _MARGIN_TOP + 14 + 16 * idx
        lx = _MARGIN_LEFT + plot_w - 130
        out.append(
            f'<line x1="{lx}" y1="{legend_y - 4}" x2="{lx + 22}" y2="{legend_y - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{lx + 28}" y="{legend_y}">{label}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
