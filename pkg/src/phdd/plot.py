"""Minimal static SVG line plots (no plotting library)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 150, 40, 50


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    markers: bool = False


def _axis_map(lo, hi, a, b, log):
    if log:
        lo, hi = np.log10(lo), np.log10(hi)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5

    def f(v):
        v = np.log10(v) if log else np.asarray(v, dtype=float)
        return a + (v - lo) / (hi - lo) * (b - a)

    return f


def plot(series, path, title: str = "", xlabel: str = "", ylabel: str = "",
         loglog: bool = False, slope: float | None = None) -> Path:
    """Write an SVG with one polyline per series.

    ``loglog`` switches both axes to log scale (convergence plots).  When
    ``slope`` is given on a log-log plot a reference triangle with that slope
    is drawn below the first series.
    """
    series = [s if isinstance(s, Series) else Series(*s) for s in series]
    if not series or any(len(s.x) == 0 for s in series):
        raise ValueError("cannot plot an empty series")
    for s in series:
        if len(s.x) != len(s.y):
            raise ValueError(f"series {s.label!r}: x and y lengths differ")
    xs = np.concatenate([np.asarray(s.x, float) for s in series])
    ys = np.concatenate([np.asarray(s.y, float) for s in series])
    good = np.isfinite(xs) & np.isfinite(ys)
    if loglog:
        good &= (xs > 0) & (ys > 0)
    if not good.any():
        raise ValueError("no finite data to plot")
    fx = _axis_map(xs[good].min(), xs[good].max(), _ML, _W - _MR, loglog)
    fy = _axis_map(ys[good].min(), ys[good].max(), _H - _MB, _MT, loglog)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{_esc(title)}</text>')
    out.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" text-anchor="middle" font-size="13">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.1f})">{_esc(ylabel)}</text>')
    for label, v, anchor in (("x", xs[good].min(), "start"), ("x", xs[good].max(), "end")):
        out.append(f'<text x="{fx(v):.1f}" y="{_H - _MB + 16}" text-anchor="{anchor}" font-size="11">{v:.3g}</text>')
    for v in (ys[good].min(), ys[good].max()):
        out.append(f'<text x="{_ML - 4}" y="{fy(v):.1f}" text-anchor="end" font-size="11">{v:.3g}</text>')

    for i, s in enumerate(series):
        c = _COLORS[i % len(_COLORS)]
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if loglog:
            ok &= (x > 0) & (y > 0)
        px, py = fx(x[ok]), fy(y[ok])
        if len(px) > 1:
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        if s.markers or len(px) == 1:
            out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{c}"/>' for a, b in zip(px, py)]
        ly = _MT + 16 + 18 * i
        out.append(f'<line x1="{_W - _MR + 10}" y1="{ly - 4}" x2="{_W - _MR + 30}" y2="{ly - 4}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _MR + 34}" y="{ly}" font-size="11">{_esc(s.label)}</text>')

    if slope is not None and loglog:
        tri = slope_triangle(series[0].x, series[0].y, slope)
        pts = " ".join(f"{fx(a):.2f},{fy(b):.2f}" for a, b in tri)
        out.append(f'<polygon points="{pts}" fill="none" stroke="gray" stroke-dasharray="4,3"/>')
        out.append(f'<text x="{fx(tri[1][0]) + 4:.1f}" y="{(fy(tri[1][1]) + fy(tri[2][1])) / 2:.1f}" '
                   f'font-size="11" fill="gray">{slope:.2f}</text>')
    out.append("</svg>")
    p = Path(path)
    p.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
    return p


def slope_triangle(h, err, slope: float):
    """Vertices of a reference triangle of the given log-log slope.

    The triangle spans the central half-decade of the ``h`` range and sits a
    factor two below the data: ``(h_a, e_a) -> (h_b, e_a) -> (h_b, e_b)`` with
    ``e_b = e_a (h_b / h_a)^slope``.
    """
    h = np.asarray(h, float)
    err = np.asarray(err, float)
    lo, hi = np.log10(h.min()), np.log10(h.max())
    ha = 10 ** (lo + 0.25 * (hi - lo))
    hb = 10 ** (lo + 0.75 * (hi - lo))
    ea = 0.5 * np.exp(np.interp(np.log(ha), np.log(h[::-1] if h[0] > h[-1] else h),
                                np.log(err[::-1] if h[0] > h[-1] else err)))
    eb = ea * (hb / ha) ** slope
    return [(ha, ea), (hb, ea), (hb, eb)]


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
