"""Static SVG figures: dendrogram and iso-utility curves."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .backtest.cluster import ClusterTree

W, H, PAD = 640, 420, 60


def _svg(body: list[str], title: str) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">'
    )
    t = f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', t, *body, "</svg>"]) + "\n"


def _axes(xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 18}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{H / 2:.1f}" text-anchor="middle" transform="rotate(-90 18 {H / 2:.1f})">{escape(ylabel)}</text>',
    ]


def dendrogram_svg(tree: ClusterTree, title: str = "Horizon sleeves, 1 - correlation") -> str:
    """Leaves along the x-axis in merge order, merge height on the y-axis."""
    order = list(tree.merges[-1].members) if tree.merges else list(tree.leaves)
    n = len(order)
    top = max([m.distance for m in tree.merges] + [1e-12]) * 1.1
    sx = (W - 2 * PAD) / max(n - 1, 1)

    def y(d: float) -> float:
        return H - PAD - d / top * (H - 2 * PAD)

    pos = {(leaf,): (PAD + k * sx, y(0.0)) for k, leaf in enumerate(order)}
    body = _axes("", "distance")
    for leaf, (x, y0) in pos.items():
        body.append(f'<text x="{x:.1f}" y="{H - PAD + 16}" text-anchor="middle">{escape(leaf[0])}</text>')
    for m in tree.merges:
        (xl, yl), (xr, yr) = pos[m.left], pos[m.right]
        ym = y(m.distance)
        body.append(
            f'<polyline fill="none" stroke="steelblue" stroke-width="2" '
            f'points="{xl:.1f},{yl:.1f} {xl:.1f},{ym:.1f} {xr:.1f},{ym:.1f} {xr:.1f},{yr:.1f}"/>'
        )
        pos[m.members] = ((xl + xr) / 2, ym)
    for k in range(5):
        d = top * k / 4
        body.append(f'<text x="{PAD - 6}" y="{y(d) + 4:.1f}" text-anchor="end">{d:.2f}</text>')
    return _svg(body, title)


def iso_utility_svg(
    points: Mapping[str, tuple[float, float]],
    alpha: float = 0.8,
    levels: Sequence[float] | None = None,
    title: str = "Return/MaxDD against benchmark correlation",
) -> str:
    """Strategy points in (correlation, return/maxdd) space with curves of constant
    x^alpha c^(1-alpha). Points with undefined coordinates are skipped."""
    pts = {k: v for k, v in points.items() if v[0] is not None and v[1] is not None and v[0] > 0 and v[1] > 0}
    xs = [c for _, c in pts.values()] or [0.5]
    ys = [r for r, _ in pts.values()] or [1.0]
    cx0, cx1 = max(min(xs) - 0.1, 0.01), min(max(xs) + 0.1, 1.0)
    if cx1 <= cx0:
        cx0, cx1 = 0.01, 1.0
    ry1 = max(ys) * 1.3
    ry0 = 0.0

    def px(c: float) -> float:
        return PAD + (c - cx0) / (cx1 - cx0) * (W - 2 * PAD)

    def py(r: float) -> float:
        return H - PAD - (r - ry0) / (ry1 - ry0) * (H - 2 * PAD)

    if levels is None:
        levels = sorted({round(r ** alpha * c ** (1 - alpha), 4) for r, c in pts.values()})
    body = _axes("correlation with benchmark", "return / max drawdown")
    grid = np.linspace(cx0, cx1, 60)
    for u in levels:
        if alpha == 0:
            continue
        r = (u / grid ** (1 - alpha)) ** (1 / alpha)
        keep = r <= ry1
        coords = " ".join(f"{px(c):.1f},{py(v):.1f}" for c, v in zip(grid[keep], r[keep]))
        if coords:
            body.append(f'<polyline fill="none" stroke="#bbbbbb" stroke-dasharray="4 3" points="{coords}"/>')
    for name, (r, c) in pts.items():
        body.append(f'<circle cx="{px(c):.1f}" cy="{py(r):.1f}" r="4" fill="firebrick"/>')
        body.append(f'<text x="{px(c) + 6:.1f}" y="{py(r) - 6:.1f}">{escape(name)}</text>')
    for c in np.linspace(cx0, cx1, 5):
        body.append(f'<text x="{px(c):.1f}" y="{H - PAD + 16}" text-anchor="middle">{c:.2f}</text>')
    for r in np.linspace(ry0, ry1, 5):
        body.append(f'<text x="{PAD - 6}" y="{py(r) + 4:.1f}" text-anchor="end">{r:.2f}</text>')
    return _svg(body, f"{title} (alpha={alpha:g})")


def write_svg(text: str, path: str | Path) -> None:
    Path(path).write_text(text, encoding="utf-8")
