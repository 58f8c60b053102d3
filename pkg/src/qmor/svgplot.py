"""Self-contained SVG line plots (no plotting dependency)."""

from __future__ import annotations

import numpy as np

__all__ = ["line_plot"]

_PALETTE = ("#1f6fb2", "#d1495b", "#3d8f5f", "#8d6cab", "#c98a2b", "#4a4a4a")

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 64, 16, 28, 46


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(float(v))
        v += step
    return ticks


def line_plot(times, series: dict[str, np.ndarray], path, title: str = "",
              xlabel: str = "t", ylabel: str = "") -> None:
    """Write a line plot of the named series (all over the same time axis)
    to ``path`` as a standalone SVG file."""
    t = np.asarray(times, dtype=float)
    lo_x, hi_x = float(t[0]), float(t[-1])
    all_vals = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    lo_y, hi_y = float(all_vals.min()), float(all_vals.max())
    if hi_y == lo_y:
        hi_y = lo_y + 1.0
    pad = 0.05 * (hi_y - lo_y)
    lo_y -= pad
    hi_y += pad

    inner_w = _W - _ML - _MR
    inner_h = _H - _MT - _MB

    def px(x):
        return _ML + (x - lo_x) / (hi_x - lo_x) * inner_w

    def py(y):
        return _MT + (hi_y - y) / (hi_y - lo_y) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_W/2:.1f}" y="18" text-anchor="middle" '
            f'font-size="14">{title}</text>'
        )
    for xv in _ticks(lo_x, hi_x):
        if not lo_x <= xv <= hi_x:
            continue
        x = px(xv)
        parts.append(
            f'<line x1="{x:.1f}" y1="{_MT + inner_h}" x2="{x:.1f}" '
            f'y2="{_MT + inner_h + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{_MT + inner_h + 18}" '
            f'text-anchor="middle">{xv:g}</text>'
        )
    for yv in _ticks(lo_y, hi_y):
        if not lo_y <= yv <= hi_y:
            continue
        y = py(yv)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{y:.1f}" x2="{_ML}" y2="{y:.1f}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{y + 4:.1f}" text-anchor="end">{yv:g}</text>'
        )
    parts.append(
        f'<text x="{_ML + inner_w / 2:.1f}" y="{_H - 8}" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    if ylabel:
        parts.append(
            f'<text x="16" y="{_MT + inner_h / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_MT + inner_h / 2:.1f})">{ylabel}</text>'
        )
    for i, (name, vals) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(
            f"{px(x):.2f},{py(y):.2f}" for x, y in zip(t, np.asarray(vals, dtype=float))
        )
        dash = "" if i % 2 == 0 else ' stroke-dasharray="6 4"'
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"{dash}/>'
        )
        ly = _MT + 16 + 16 * i
        lx = _ML + inner_w - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 26}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"{dash}/>'
        )
        parts.append(f'<text x="{lx + 32}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
