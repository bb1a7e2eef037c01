"""Self-contained SVG rendering: line charts and Gaussian density contours.

No plotting dependency: contour polylines come from marching squares on a
201x201 density raster, charts are plain polylines.  Element order and
coordinate formatting are deterministic so outputs are golden-file stable.
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = ["#1f6fb4", "#d45500", "#2c8c4b", "#b01f6e", "#6a4fb3", "#8c6d31"]
CONTOUR_GRID = 201
CONTOUR_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def marching_squares(z: np.ndarray, xs: np.ndarray, ys: np.ndarray, level: float):
    """Line segments of the iso-contour ``z == level``.

    ``z[i, j]`` is the value at ``(xs[j], ys[i])``.  Saddle cells split by
    the cell-center average.  Returns a list of ((x0, y0), (x1, y1)) pairs
    in scan order.
    """
    above = z > level
    # cells whose corners disagree are the only ones that can carry a segment
    c00 = above[:-1, :-1]
    c10 = above[:-1, 1:]
    c11 = above[1:, 1:]
    c01 = above[1:, :-1]
    mixed = ~((c00 == c10) & (c10 == c11) & (c11 == c01))
    segments = []

    def interp(va, vb, pa, pb):
        t = (level - va) / (vb - va)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    for i, j in zip(*np.nonzero(mixed)):
        v00, v10 = z[i, j], z[i, j + 1]
        v11, v01 = z[i + 1, j + 1], z[i + 1, j]
        p00, p10 = (xs[j], ys[i]), (xs[j + 1], ys[i])
        p11, p01 = (xs[j + 1], ys[i + 1]), (xs[j], ys[i + 1])
        case = (
            (v00 > level) | ((v10 > level) << 1) | ((v11 > level) << 2) | ((v01 > level) << 3)
        )
        bottom = interp(v00, v10, p00, p10) if (v00 > level) != (v10 > level) else None
        right = interp(v10, v11, p10, p11) if (v10 > level) != (v11 > level) else None
        top = interp(v01, v11, p01, p11) if (v01 > level) != (v11 > level) else None
        left = interp(v00, v01, p00, p01) if (v00 > level) != (v01 > level) else None
        if case in (1, 14):
            segments.append((left, bottom))
        elif case in (2, 13):
            segments.append((bottom, right))
        elif case in (3, 12):
            segments.append((left, right))
        elif case in (4, 11):
            segments.append((right, top))
        elif case in (6, 9):
            segments.append((bottom, top))
        elif case in (7, 8):
            segments.append((left, top))
        elif case in (5, 10):
            center_above = 0.25 * (v00 + v10 + v11 + v01) > level
            if (case == 5) == center_above:
                segments.append((left, top))
                segments.append((bottom, right))
            else:
                segments.append((left, bottom))
                segments.append((right, top))
    return segments


def _svg_header(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" version="1.1">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n'
    )


def _text(x, y, s, size=12, anchor="middle", color="#222222"):
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
        f'font-size="{size}" text-anchor="{anchor}" fill="{color}">{s}</text>\n'
    )


def _ticks(lo, hi, n=5):
    return list(np.linspace(lo, hi, n))


def correlation_density(c: float, grid: int = CONTOUR_GRID, extent: float = 3.2):
    """Density raster of the centered bivariate Gaussian with unit marginals."""
    xs = np.linspace(-extent, extent, grid)
    ys = np.linspace(-extent, extent, grid)
    det = 1.0 - c * c
    gx, gy = np.meshgrid(xs, ys)
    quad = (gx * gx - 2.0 * c * gx * gy + gy * gy) / det
    z = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return xs, ys, z


def contour_panel_svg(panels, title: str) -> str:
    """One row of square density-contour panels.

    ``panels`` is a list of (label, correlation) pairs; each panel shows the
    contours of the coupling density with that cross-correlation.
    """
    size, margin, gap, header = 220, 34, 16, 52
    n = len(panels)
    width = margin * 2 + n * size + (n - 1) * gap
    height = header + size + margin + 14
    parts = [_svg_header(width, height)]
    parts.append(_text(width / 2, 24, title, size=15))
    extent = 3.2
    for k, (label, c) in enumerate(panels):
        x0 = margin + k * (size + gap)
        y0 = header
        xs, ys, z = correlation_density(c)
        peak = z.max()
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{size}" height="{size}" '
            f'fill="none" stroke="#444444" stroke-width="1"/>\n'
        )

        def to_px(pt, x0=x0, y0=y0):
            px = x0 + (pt[0] + extent) / (2 * extent) * size
            py = y0 + (extent - pt[1]) / (2 * extent) * size
            return px, py

        for li, frac in enumerate(CONTOUR_LEVELS):
            color = PALETTE[li % len(PALETTE)]
            pieces = []
            for (pa, pb) in marching_squares(z, xs, ys, frac * peak):
                qa, qb = to_px(pa), to_px(pb)
                pieces.append(
                    f"M{_fmt(qa[0])} {_fmt(qa[1])}L{_fmt(qb[0])} {_fmt(qb[1])}"
                )
            if pieces:
                parts.append(
                    f'<path d="{"".join(pieces)}" stroke="{color}" '
                    f'stroke-width="1" fill="none"/>\n'
                )
        parts.append(_text(x0 + size / 2, y0 + size + 18, label, size=12))
    parts.append("</svg>\n")
    return "".join(parts)


def line_chart_svg(
    x_values,
    curves,
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """Polyline chart; ``curves`` is a list of (label, y-array) pairs.

    Points with non-finite y (failed sweep rows) break the polyline.
    """
    width, height = 640, 420
    left, right, top, bottom = 64, 24, 48, 56
    plot_w, plot_h = width - left - right, height - top - bottom
    xs = np.asarray(x_values, dtype=float)
    finite = [y[np.isfinite(y)] for _, y in ((l, np.asarray(y, float)) for l, y in curves)]
    all_y = np.concatenate([f for f in finite if f.size]) if finite else np.array([0.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo = min(0.0, float(all_y.min()))
    y_hi = float(all_y.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi *= 1.05

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return top + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [_svg_header(width, height)]
    parts.append(_text(width / 2, 26, title, size=15))
    parts.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>\n'
    )
    for tx in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{_fmt(px(tx))}" y1="{top + plot_h}" x2="{_fmt(px(tx))}" '
            f'y2="{top + plot_h + 5}" stroke="#444444" stroke-width="1"/>\n'
        )
        parts.append(_text(px(tx), top + plot_h + 20, f"{tx:g}", size=11))
    for ty in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{left - 5}" y1="{_fmt(py(ty))}" x2="{left}" '
            f'y2="{_fmt(py(ty))}" stroke="#444444" stroke-width="1"/>\n'
        )
        parts.append(_text(left - 9, py(ty) + 4, f"{ty:.3g}", size=11, anchor="end"))
    parts.append(_text(width / 2, height - 14, x_label, size=12))
    parts.append(
        f'<text x="16" y="{_fmt(top + plot_h / 2)}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle" fill="#222222" '
        f'transform="rotate(-90 16 {_fmt(top + plot_h / 2)})">{y_label}</text>\n'
    )
    for k, (label, y) in enumerate(curves):
        y = np.asarray(y, dtype=float)
        color = PALETTE[k % len(PALETTE)]
        run = []
        chunks = []
        for xv, yv in zip(xs, y):
            if np.isfinite(yv):
                run.append(f"{_fmt(px(xv))},{_fmt(py(yv))}")
            elif run:
                chunks.append(run)
                run = []
        if run:
            chunks.append(run)
        for chunk in chunks:
            parts.append(
                f'<polyline points="{" ".join(chunk)}" fill="none" '
                f'stroke="{color}" stroke-width="1.6"/>\n'
            )
        ly = top + 16 + 16 * k
        parts.append(
            f'<line x1="{left + plot_w - 120}" y1="{ly - 4}" x2="{left + plot_w - 96}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>\n'
        )
        parts.append(_text(left + plot_w - 90, ly, label, size=11, anchor="start"))
    parts.append("</svg>\n")
    return "".join(parts)
