"""Dependency-free SVG plots: labeled scatter and a line chart."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
WIDTH, HEIGHT, MARGIN = 480, 480, 40


def _scale(values, lo_px, hi_px):
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo if hi > lo else 1.0
    return lo_px + (v - lo) / span * (hi_px - lo_px)


def _document(body, title):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
            f'<title>{escape(title)}</title>\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def scatter_svg(points, labels, path, centers=(), title="clusters") -> Path:
    """Scatter of 2-D points colored by label; ``centers`` are drawn as crosses."""
    pts = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    xs = _scale(pts[:, 0], MARGIN, WIDTH - MARGIN)
    ys = _scale(pts[:, 1], HEIGHT - MARGIN, MARGIN)  # svg y grows downwards
    body = []
    for x, y, lab in zip(xs, ys, labels):
        color = PALETTE[int(lab) % len(PALETTE)]
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
    for c in centers:
        x, y = xs[c], ys[c]
        body.append(f'<path class="center" d="M{x - 5:.2f},{y - 5:.2f}L{x + 5:.2f},{y + 5:.2f}'
                    f'M{x - 5:.2f},{y + 5:.2f}L{x + 5:.2f},{y - 5:.2f}" '
                    f'stroke="black" stroke-width="2"/>')
    path = Path(path)
    path.write_text(_document(body, title), encoding="utf-8")
    return path


def line_svg(x, y, path, title="", xlabel="", ylabel="") -> Path:
    """Polyline with markers, e.g. entropy against bond dimension."""
    xs = _scale(x, MARGIN, WIDTH - MARGIN)
    ys = _scale(y, HEIGHT - MARGIN, MARGIN)
    coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
    body = [f'<polyline points="{coords}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>']
    for a, b, xv, yv in zip(xs, ys, x, y):
        body.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{PALETTE[0]}"/>')
        body.append(f'<text x="{a:.2f}" y="{b - 8:.2f}" font-size="10" text-anchor="middle">'
                    f'{escape(f"{yv:.4g}")}</text>')
    body.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" font-size="12" text-anchor="middle">'
                f'{escape(xlabel)}</text>')
    body.append(f'<text x="12" y="{HEIGHT / 2}" font-size="12" '
                f'transform="rotate(-90 12 {HEIGHT / 2})" text-anchor="middle">{escape(ylabel)}</text>')
    path = Path(path)
    path.write_text(_document(body, title), encoding="utf-8")
    return path
