"""Minimal deterministic SVG line charts (no plotting dependency).

Output bytes depend only on the input series: coordinates are formatted with
fixed precision and no timestamps or generated ids are embedded, so reruns
on identical input produce identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .metrics import MetricSeries

WIDTH, HEIGHT = 720, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 190, 46, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
N_TICKS = 5


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def emit_svg(
    series: list[MetricSeries],
    path,
    title: str = "",
    y_label: str = "",
    baseline_markers: bool = False,
) -> Path:
    """Write one polyline per series over a shared tau axis.

    Series with confidence bounds get vertical whiskers.  With
    ``baseline_markers`` a red star marks each series' tau = 0 value (the
    metric of the unprojected data).
    """
    if not series:
        raise ValueError("emit_svg needs at least one series")
    taus = series[0].taus
    for s in series[1:]:
        if s.taus.shape != taus.shape or not np.array_equal(s.taus, taus):
            raise ValueError("all series must share one tau grid")

    x_min, x_max = float(np.min(taus)), float(np.max(taus))
    if x_min == x_max:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    pool = []
    for s in series:
        pool.append(s.values)
        if s.lower_ci is not None:
            pool.append(s.lower_ci)
        if s.upper_ci is not None:
            pool.append(s.upper_ci)
    finite = np.concatenate(pool)
    finite = finite[np.isfinite(finite)]
    if finite.size == 0:
        raise ValueError("no finite values to plot")
    y_min, y_max = float(np.min(finite)), float(np.max(finite))
    if y_min == y_max:
        pad = max(0.5, abs(y_min) * 0.1)
        y_min, y_max = y_min - pad, y_max + pad
    else:
        pad = 0.05 * (y_max - y_min)
        y_min, y_max = y_min - pad, y_max + pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(v: float) -> float:
        return MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w

    def sy(v: float) -> float:
        return MARGIN_TOP + (y_max - v) / (y_max - y_min) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{_fmt(MARGIN_LEFT)}" y="{_fmt(MARGIN_TOP)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{_escape(title)}</text>'
        )

    for i in range(N_TICKS):
        frac = i / (N_TICKS - 1)
        xv = x_min + frac * (x_max - x_min)
        xp = sx(xv)
        parts.append(
            f'<line x1="{_fmt(xp)}" y1="{_fmt(MARGIN_TOP + plot_h)}" '
            f'x2="{_fmt(xp)}" y2="{_fmt(MARGIN_TOP + plot_h + 5)}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(xp)}" y="{_fmt(MARGIN_TOP + plot_h + 20)}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{_tick_label(xv)}</text>"
        )
        yv = y_min + frac * (y_max - y_min)
        yp = sy(yv)
        parts.append(
            f'<line x1="{_fmt(MARGIN_LEFT - 5)}" y1="{_fmt(yp)}" '
            f'x2="{_fmt(MARGIN_LEFT)}" y2="{_fmt(yp)}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(MARGIN_LEFT - 9)}" y="{_fmt(yp + 4)}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11">'
            f"{_tick_label(yv)}</text>"
        )
    parts.append(
        f'<text x="{_fmt(MARGIN_LEFT + plot_w / 2)}" y="{_fmt(HEIGHT - 14)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">tau</text>'
    )
    if y_label:
        yc = MARGIN_TOP + plot_h / 2
        parts.append(
            f'<text x="18" y="{_fmt(yc)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 18 {_fmt(yc)})">{_escape(y_label)}</text>'
        )

    for si, s in enumerate(series):
        color = PALETTE[si % len(PALETTE)]
        if s.lower_ci is not None and s.upper_ci is not None:
            for xv, lo, hi in zip(s.taus, s.lower_ci, s.upper_ci):
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    continue
                xp = sx(float(xv))
                parts.append(
                    f'<line x1="{_fmt(xp)}" y1="{_fmt(sy(float(lo)))}" '
                    f'x2="{_fmt(xp)}" y2="{_fmt(sy(float(hi)))}" '
                    f'stroke="{color}" stroke-width="1" opacity="0.6"/>'
                )
                for bound in (lo, hi):
                    yp = sy(float(bound))
                    parts.append(
                        f'<line x1="{_fmt(xp - 3)}" y1="{_fmt(yp)}" '
                        f'x2="{_fmt(xp + 3)}" y2="{_fmt(yp)}" '
                        f'stroke="{color}" stroke-width="1" opacity="0.6"/>'
                    )
        points = " ".join(
            f"{_fmt(sx(float(xv)))},{_fmt(sy(float(yv)))}"
            for xv, yv in zip(s.taus, s.values)
            if math.isfinite(float(yv))
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        legend_y = MARGIN_TOP + 14 + 18 * si
        lx = WIDTH - MARGIN_RIGHT + 12
        parts.append(
            f'<line x1="{_fmt(lx)}" y1="{_fmt(legend_y - 4)}" x2="{_fmt(lx + 22)}" '
            f'y2="{_fmt(legend_y - 4)}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_fmt(lx + 28)}" y="{_fmt(legend_y)}" '
            f'font-family="sans-serif" font-size="11">{_escape(s.model_name)}</text>'
        )

    if baseline_markers:
        zero = np.nonzero(series[0].taus == 0.0)[0]
        if zero.size:
            i0 = int(zero[0])
            for s in series:
                yv = float(s.values[i0])
                if math.isfinite(yv):
                    parts.append(_star(sx(0.0), sy(yv)))

    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def _star(cx: float, cy: float, r: float = 7.0) -> str:
    """Red five-point star marking a baseline value."""
    pts = []
    for i in range(10):
        radius = r if i % 2 == 0 else r * 0.4
        angle = -math.pi / 2 + i * math.pi / 5
        pts.append(f"{_fmt(cx + radius * math.cos(angle))},{_fmt(cy + radius * math.sin(angle))}")
    return f'<polygon points="{" ".join(pts)}" fill="#d62728" stroke="#7f0000" stroke-width="0.8"/>'


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
