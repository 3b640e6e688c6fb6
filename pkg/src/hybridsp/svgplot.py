"""Minimal static SVG line plots: one polyline per series, simple markers.

Hand-rolled on purpose: the output contract is a small, predictable SVG
(valid XML, exactly one ``<polyline>`` element per plotted series) that
downstream checks can parse without a plotting stack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2")

_W, _H = 720, 520
_ML, _MR, _MT, _MB = 70, 20, 40, 55


@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    color: str | None = None


@dataclass
class Marker:
    x: float
    y: float
    kind: str = "circle"  # or "cross"
    label: str = ""


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(v) for v in raw]


def write_svg(path, series: Sequence[Series], markers: Sequence[Marker] = (),
              title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    all_x = [np.asarray(s.x, dtype=float) for s in series]
    all_y = [np.asarray(s.y, dtype=float) for s in series]
    if markers:
        all_x.append(np.array([m.x for m in markers], dtype=float))
        all_y.append(np.array([m.y for m in markers], dtype=float))
    xs = np.concatenate(all_x)
    ys = np.concatenate(all_y)
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad_x = 0.03 * (x_hi - x_lo)
    pad_y = 0.06 * (y_hi - y_lo)
    x_lo -= pad_x
    x_hi += pad_x
    y_lo -= pad_y
    y_hi += pad_y

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out: list[str] = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
               f'height="{_H}" viewBox="0 0 {_W} {_H}">')
    out.append(f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>')
    if title:
        out.append(f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-size="16" font-family="sans-serif">'
                   f'{escape(title)}</text>')
    # axes box and ticks
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="#333"/>')
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(tx):.1f}" y1="{_H - _MB}" '
                   f'x2="{px(tx):.1f}" y2="{_H - _MB + 5}" stroke="#333"/>')
        out.append(f'<text x="{px(tx):.1f}" y="{_H - _MB + 18}" '
                   f'text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{tx:.3g}</text>')
    for ty in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{_ML - 5}" y1="{py(ty):.1f}" x2="{_ML}" '
                   f'y2="{py(ty):.1f}" stroke="#333"/>')
        out.append(f'<text x="{_ML - 8}" y="{py(ty):.1f}" text-anchor="end" '
                   f'dominant-baseline="middle" font-size="11" '
                   f'font-family="sans-serif">{ty:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{_W / 2:.1f}" y="{_H - 12}" '
                   f'text-anchor="middle" font-size="13" '
                   f'font-family="sans-serif">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{_H / 2:.1f}" text-anchor="middle" '
                   f'font-size="13" font-family="sans-serif" '
                   f'transform="rotate(-90 18 {_H / 2:.1f})">'
                   f'{escape(ylabel)}</text>')

    for k, s in enumerate(series):
        color = s.color or _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{px(float(xv)):.2f},{py(float(yv)):.2f}"
                       for xv, yv in zip(s.x, s.y))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.4"{dash}/>')
        out.append(f'<text x="{_W - _MR - 8}" y="{_MT + 16 + 14 * k}" '
                   f'text-anchor="end" font-size="11" fill="{color}" '
                   f'font-family="sans-serif">{escape(s.name)}</text>')

    for m in markers:
        cx, cy = px(m.x), py(m.y)
        if m.kind == "circle":
            out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="5" '
                       f'fill="none" stroke="#000" stroke-width="1.5"/>')
        else:
            out.append(f'<path d="M {cx - 4:.1f} {cy - 4:.1f} L {cx + 4:.1f} '
                       f'{cy + 4:.1f} M {cx - 4:.1f} {cy + 4:.1f} '
                       f'L {cx + 4:.1f} {cy - 4:.1f}" stroke="#000" '
                       f'stroke-width="1.5"/>')
        if m.label:
            out.append(f'<text x="{cx + 7:.1f}" y="{cy - 7:.1f}" '
                       f'font-size="10" font-family="sans-serif">'
                       f'{escape(m.label)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
        fh.write("\n")
