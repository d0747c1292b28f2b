"""Minimal SVG line plots (presentation only)."""

from html import escape
from typing import List, Tuple

import numpy as np

from stmeta.models.result import Plot

WIDTH = 640
HEIGHT = 400
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
MAX_POINTS = 2000


def _bounds(values: np.ndarray) -> Tuple[float, float]:
    finite = values[np.isfinite(values)]
    if len(finite) == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _decimate(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


def _ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(plot: Plot) -> str:
    """Render `plot` as a standalone SVG document."""
    left, right, top, bottom = MARGIN
    inner_w = WIDTH - left - right
    inner_h = HEIGHT - top - bottom

    xs, ys = [], []
    for s in plot.series:
        x = np.asarray(s.x, dtype=float)
        if plot.log_x:
            x = np.log10(np.where(x > 0, x, np.nan))
        xs.append(x)
        ys.append(np.asarray(s.y, dtype=float))
    x_lo, x_hi = _bounds(np.concatenate(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = _bounds(np.concatenate(ys)) if ys else (0.0, 1.0)

    def px(x: np.ndarray) -> np.ndarray:
        return left + (x - x_lo) / (x_hi - x_lo) * inner_w

    def py(y: np.ndarray) -> np.ndarray:
        return top + (y_hi - y) / (y_hi - y_lo) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{inner_w}" height="{inner_h}" '
        f'fill="white" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
        f"{escape(plot.title)}</text>",
    ]
    for v in _ticks(x_lo, x_hi):
        label = f"1e{v:.1f}" if plot.log_x else f"{v:.3g}"
        parts.append(
            f'<text x="{px(np.float64(v)):.1f}" y="{HEIGHT - bottom + 15}" '
            f'text-anchor="middle">{label}</text>'
        )
    for v in _ticks(y_lo, y_hi):
        parts.append(
            f'<text x="{left - 5}" y="{py(np.float64(v)) + 4:.1f}" text-anchor="end">{v:.3g}</text>'
        )
    parts.append(
        f'<text x="{left + inner_w / 2:.1f}" y="{HEIGHT - 8}" text-anchor="middle">'
        f"{escape(plot.x_label)}</text>"
    )
    parts.append(
        f'<text x="14" y="{top + inner_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + inner_h / 2:.1f})">{escape(plot.y_label)}</text>'
    )

    for i, (s, x, y) in enumerate(zip(plot.series, xs, ys)):
        x, y = _decimate(x, y)
        keep = np.isfinite(x) & np.isfinite(y)
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x[keep]), py(y[keep])))
        color = COLORS[i % len(COLORS)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        parts.append(
            f'<text x="{left + 8}" y="{top + 14 * (i + 1)}" fill="{color}">{escape(s.label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

