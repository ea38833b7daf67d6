"""Minimal hand-emitted SVG charts: diagram scatter, quiver, line chart.

No plotting dependency; output is deterministic, self-contained XML with
nothing external referenced, so files diff cleanly across runs.
"""

from __future__ import annotations

from typing import Sequence

WIDTH = 560
HEIGHT = 560
MARGIN = 60

HARD_COLOR = "#d62728"
EASY_COLOR = "#1f77b4"
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _sq_x(v: float) -> float:
    """Diagram coordinate in [-1, 1] to pixel x."""
    return MARGIN + (v + 1.0) / 2.0 * (WIDTH - 2 * MARGIN)


def _sq_y(v: float) -> float:
    return HEIGHT - MARGIN - (v + 1.0) / 2.0 * (HEIGHT - 2 * MARGIN)


def _document(body: list[str], title: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _square_axes(x_label: str, y_label: str) -> list[str]:
    x0, x1 = _sq_x(-1.0), _sq_x(1.0)
    y0, y1 = _sq_y(-1.0), _sq_y(1.0)
    parts = [
        f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" '
        f'height="{_f(y0 - y1)}" fill="none" stroke="black"/>'
    ]
    for v in (-1.0, -0.5, 0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{_f(_sq_x(v))}" y="{_f(y0 + 18)}" '
            f'text-anchor="middle" font-family="monospace" '
            f'font-size="11">{v:g}</text>'
        )
        parts.append(
            f'<text x="{_f(x0 - 8)}" y="{_f(_sq_y(v) + 4)}" '
            f'text-anchor="end" font-family="monospace" '
            f'font-size="11">{v:g}</text>'
        )
    parts.append(
        f'<text x="{(WIDTH) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" '
        f'font-family="monospace" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT // 2})">{y_label}</text>'
    )
    # the s_an = s_ap diagonal separating hard from easy triplets
    parts.append(
        f'<line x1="{_f(_sq_x(-1.0))}" y1="{_f(_sq_y(-1.0))}" '
        f'x2="{_f(_sq_x(1.0))}" y2="{_f(_sq_y(1.0))}" '
        f'stroke="gray" stroke-dasharray="5,4"/>'
    )
    return parts


def diagram_scatter(
    points: Sequence[tuple[float, float, bool]], title: str
) -> str:
    """Scatter of (s_ap, s_an, hard) diagram points; hard drawn in red."""
    body = _square_axes("s_ap", "s_an")
    for s_ap, s_an, hard in points:
        color = HARD_COLOR if hard else EASY_COLOR
        body.append(
            f'<circle cx="{_f(_sq_x(s_ap))}" cy="{_f(_sq_y(s_an))}" '
            f'r="3" fill="{color}" fill-opacity="0.6"/>'
        )
    return _document(body, title)


def field_quiver(
    s_ap: Sequence[float],
    s_an: Sequence[float],
    d_sap: Sequence[float],
    d_san: Sequence[float],
    title: str,
) -> str:
    """Arrow per cell, length scaled by delta magnitude."""
    mags = [
        (dx * dx + dy * dy) ** 0.5 for dx, dy in zip(d_sap, d_san)
    ]
    max_mag = max(mags) if mags else 0.0
    n_cells = max(len(mags), 1)
    cell_px = (WIDTH - 2 * MARGIN) / max(n_cells**0.5 - 1, 1)
    scale = 0.0 if max_mag == 0 else 0.9 * cell_px / max_mag
    body = _square_axes("s_ap", "s_an")
    for x, y, dx, dy, mag in zip(s_ap, s_an, d_sap, d_san, mags):
        px, py = _sq_x(x), _sq_y(y)
        if mag * scale < 0.15:
            body.append(
                f'<circle cx="{_f(px)}" cy="{_f(py)}" r="0.8" fill="gray"/>'
            )
            continue
        qx = px + dx * scale
        qy = py - dy * scale
        ux, uy = (qx - px) / (mag * scale), (qy - py) / (mag * scale)
        head = 0.3 * mag * scale if mag * scale < 10 else 3.0
        lx = qx - head * (ux - 0.5 * uy)
        ly = qy - head * (uy + 0.5 * ux)
        rx = qx - head * (ux + 0.5 * uy)
        ry = qy - head * (uy - 0.5 * ux)
        body.append(
            f'<path d="M{_f(px)} {_f(py)} L{_f(qx)} {_f(qy)} '
            f'M{_f(lx)} {_f(ly)} L{_f(qx)} {_f(qy)} L{_f(rx)} {_f(ry)}" '
            f'stroke="{EASY_COLOR}" fill="none" stroke-width="1"/>'
        )
    return _document(body, title)


def trajectory_path(
    points: Sequence[tuple[float, float]], title: str
) -> str:
    """Polyline through diagram points; start marked green, end red."""
    body = _square_axes("s_ap", "s_an")
    coords = " ".join(
        f"{_f(_sq_x(x))},{_f(_sq_y(y))}" for x, y in points
    )
    body.append(
        f'<polyline points="{coords}" fill="none" stroke="{EASY_COLOR}" '
        f'stroke-width="1.5"/>'
    )
    if points:
        x0, y0 = points[0]
        x1, y1 = points[-1]
        body.append(
            f'<circle cx="{_f(_sq_x(x0))}" cy="{_f(_sq_y(y0))}" r="4" '
            f'fill="#2ca02c"/>'
        )
        body.append(
            f'<circle cx="{_f(_sq_x(x1))}" cy="{_f(_sq_y(y1))}" r="4" '
            f'fill="{HARD_COLOR}"/>'
        )
    return _document(body, title)


def line_chart(
    series: Sequence[tuple[str, Sequence[float]]],
    title: str,
    y_min: float = 0.0,
    y_max: float = 1.0,
) -> str:
    """One polyline per (label, values) series over an integer x axis."""
    n = max((len(vals) for _, vals in series), default=1)
    span = max(y_max - y_min, 1e-12)

    def px(i: int) -> float:
        return MARGIN + (i / max(n - 1, 1)) * (WIDTH - 2 * MARGIN)

    def py(v: float) -> float:
        frac = (v - y_min) / span
        return HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)

    body = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>'
    ]
    for tick in range(5):
        v = y_min + span * tick / 4
        body.append(
            f'<text x="{MARGIN - 8}" y="{_f(py(v) + 4)}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{v:.2f}</text>'
        )
    body.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">epoch</text>'
    )
    for idx, (label, values) in enumerate(series):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        coords = " ".join(
            f"{_f(px(i))},{_f(py(v))}" for i, v in enumerate(values)
        )
        body.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        body.append(
            f'<text x="{MARGIN + 10}" y="{MARGIN + 18 + 16 * idx}" '
            f'font-family="monospace" font-size="12" '
            f'fill="{color}">{label}</text>'
        )
    return _document(body, title)
