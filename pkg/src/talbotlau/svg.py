"""Minimal SVG line/point plots with error bars (no plotting dependency)."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f4e9c", "#c0392b", "#27864a", "#7d3c98", "#d68910", "#555555")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    yerr: np.ndarray | None = None
    color: str | None = None
    dashed: bool = False
    markers: bool = False
    line: bool = True


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if abs(v) < 1e4 else f"{v:.3g}"


def plot(
    series: list[Series],
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
    width: int = 640,
    height: int = 420,
    xlim: tuple[float, float] | None = None,
    ylim: tuple[float, float] | None = None,
) -> str:
    left, right, top, bottom = 70, 20, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def finite(a):
        a = np.asarray(a, dtype=float)
        return a[np.isfinite(a)]

    xs = np.concatenate([finite(s.x) for s in series]) if series else np.array([0.0, 1.0])
    ys = [finite(s.y) for s in series]
    for s in series:
        if s.yerr is not None:
            ys.append(finite(np.asarray(s.y) + np.asarray(s.yerr)))
            ys.append(finite(np.asarray(s.y) - np.asarray(s.yerr)))
    ys = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    if xs.size == 0:
        xs = np.array([0.0, 1.0])
    if ys.size == 0:
        ys = np.array([0.0, 1.0])
    x0, x1 = xlim or (float(xs.min()), float(xs.max()))
    y0, y1 = ylim or (min(0.0, float(ys.min())), float(ys.max()) * 1.05 or 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    px = lambda x: left + (x - x0) / (x1 - x0) * pw
    py = lambda y: top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.1f}" y1="{top + ph}" x2="{X:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{top + ph + 18}" text-anchor="middle">{_num(t)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{Y:.1f}" x2="{left}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.1f}" text-anchor="end">{_num(t)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
        )
    if title:
        out.append(f'<text x="{left + pw / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')

    out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>')
    out.append('<g clip-path="url(#plot)">')
    for k, s in enumerate(series):
        color = s.color or PALETTE[k % len(PALETTE)]
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if s.line and ok.sum() > 1:
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[ok], y[ok]))
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>')
        if s.yerr is not None:
            e = np.asarray(s.yerr, dtype=float)
            for a, b, de in zip(x[ok], y[ok], e[ok]):
                if np.isfinite(de):
                    out.append(
                        f'<line x1="{px(a):.1f}" y1="{py(b - de):.1f}" x2="{px(a):.1f}" '
                        f'y2="{py(b + de):.1f}" stroke="{color}"/>'
                    )
        if s.markers:
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<rect x="{px(a) - 3:.1f}" y="{py(b) - 3:.1f}" width="6" height="6" fill="{color}"/>')
    out.append("</g>")
    ly = top + 14
    for k, s in enumerate(series):
        if not s.label:
            continue
        color = s.color or PALETTE[k % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(
            f'<line x1="{left + pw - 170}" y1="{ly - 4}" x2="{left + pw - 145}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(f'<text x="{left + pw - 140}" y="{ly}">{escape(s.label)}</text>')
        ly += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"
