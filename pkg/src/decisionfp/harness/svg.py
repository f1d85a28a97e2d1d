"""Small deterministic SVG 1.1 writer for heatmaps and line plots.

Output depends only on the input numbers: coordinates are printed with fixed
precision and elements are emitted in input order, so identical data gives
byte-identical files.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import MissingArtifact

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
DASHES = ("", "6,3", "2,2", "8,3,2,3")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str, width=WIDTH, height=HEIGHT) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_f(width / 2)}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">'
        f"{escape(title)}</text>",
    ]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _axes(lines, x0, y0, x1, y1, xr, yr, xlabel, ylabel):
    lines.append(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" '
                 'fill="none" stroke="black"/>')
    for t in _ticks(*xr):
        x = x0 + (t - xr[0]) / (xr[1] - xr[0] or 1.0) * (x1 - x0)
        lines.append(f'<line x1="{_f(x)}" y1="{_f(y0)}" x2="{_f(x)}" y2="{_f(y0 + 5)}" stroke="black"/>')
        lines.append(f'<text x="{_f(x)}" y="{_f(y0 + 18)}" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{t:.4g}</text>')
    for t in _ticks(*yr):
        y = y0 - (t - yr[0]) / (yr[1] - yr[0] or 1.0) * (y0 - y1)
        lines.append(f'<line x1="{_f(x0 - 5)}" y1="{_f(y)}" x2="{_f(x0)}" y2="{_f(y)}" stroke="black"/>')
        lines.append(f'<text x="{_f(x0 - 8)}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{t:.4g}</text>')
    lines.append(f'<text x="{_f((x0 + x1) / 2)}" y="{_f(y0 + 40)}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    lines.append(f'<text x="18" y="{_f((y0 + y1) / 2)}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" transform="rotate(-90 18 {_f((y0 + y1) / 2)})">{escape(ylabel)}</text>')


def line_plot(series: list[tuple[str, np.ndarray, np.ndarray]], title: str, xlabel: str, ylabel: str,
              *, markers: bool = False) -> str:
    """Overlay of named ``(label, x, y)`` curves with a legend on the right."""
    if not series:
        raise MissingArtifact("nothing to plot")
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    finite = np.isfinite(ys)
    xr = (float(np.min(xs)), float(np.max(xs)))
    yr = (float(np.min(ys[finite])), float(np.max(ys[finite]))) if finite.any() else (0.0, 1.0)
    if yr[1] == yr[0]:
        yr = (yr[0] - 0.5, yr[1] + 0.5)
    if xr[1] == xr[0]:
        xr = (xr[0] - 0.5, xr[1] + 0.5)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    lines = _header(title)
    _axes(lines, x0, y0, x1, y1, xr, yr, xlabel, ylabel)

    def px(x, y):
        return (x0 + (x - xr[0]) / (xr[1] - xr[0]) * (x1 - x0), y0 - (y - yr[0]) / (yr[1] - yr[0]) * (y0 - y1))

    for k, (label, x, y) in enumerate(series):
        colour, dash = PALETTE[k % len(PALETTE)], DASHES[k % len(DASHES)]
        pts = [px(a, b) for a, b in zip(np.asarray(x, float), np.asarray(y, float)) if math.isfinite(b)]
        path = " ".join(f"{_f(a)},{_f(b)}" for a, b in pts)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        lines.append(f'<polyline class="curve" fill="none" stroke="{colour}" stroke-width="2"{dash_attr} '
                     f'points="{path}"/>')
        if markers:
            for a, b in pts:
                lines.append(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="3" fill="{colour}"/>')
        ly = y1 + 16 + 20 * k
        lines.append(f'<line x1="{_f(x1 + 12)}" y1="{_f(ly)}" x2="{_f(x1 + 36)}" y2="{_f(ly)}" stroke="{colour}" '
                     f'stroke-width="2"{dash_attr}/>')
        lines.append(f'<text class="legend" x="{_f(x1 + 42)}" y="{_f(ly + 4)}" font-family="sans-serif" '
                     f'font-size="12">{escape(label)}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _colour(t: float) -> str:
    """Monotone white-to-dark-blue ramp for ``t`` in [0, 1]."""
    t = min(1.0, max(0.0, t))
    r = int(round(255 * (1 - t) + 8 * t))
    g = int(round(255 * (1 - t) + 48 * t))
    b = int(round(255 * (1 - t) + 107 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values: np.ndarray, extent: tuple[float, float], title: str, xlabel="nu1", ylabel="nu2") -> str:
    """Square heatmap of ``values[i, j]`` with ``i`` along x and ``j`` along y."""
    v = np.asarray(values, float)
    nx, ny = v.shape
    size = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    x1, y1 = x0 + size, y0 - size
    vmax = float(v.max()) or 1.0
    lines = _header(title, width=x1 + 40, height=HEIGHT)
    cw, ch = size / nx, size / ny
    for i in range(nx):
        for j in range(ny):
            c = _colour(v[i, j] / vmax)
            if c == "#ffffff":
                continue
            lines.append(f'<rect x="{_f(x0 + i * cw)}" y="{_f(y0 - (j + 1) * ch)}" width="{_f(cw + 0.05)}" '
                         f'height="{_f(ch + 0.05)}" fill="{c}"/>')
    _axes(lines, x0, y0, x1, y1, extent, extent, xlabel, ylabel)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def read_table(path) -> dict[str, np.ndarray | list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = col
    return out


def write_svg(path: Path, text: str) -> Path:
    path = Path(path)
    path.write_bytes(text.encode("utf-8"))
    return path
