"""Minimal deterministic SVG plot writer (scatter, lines, bars, graphs)."""
from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39",
    "#7b4173", "#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363",
]
UNDEFINED_COLOR = "#6a3d9a"

W, H = 640, 420
MARGIN = 50


def color_for(label, labels_sorted: Sequence) -> str:
    if label == 100:
        return UNDEFINED_COLOR
    return PALETTE[labels_sorted.index(label) % len(PALETTE)]


class _Canvas:
    def __init__(self, xlim, ylim, title: str = "", width: int = W, height: int = H):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]
        if title:
            self.parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')

    def px(self, x: float) -> float:
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.w - 2 * MARGIN)

    def py(self, y: float) -> float:
        return self.h - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.h - 2 * MARGIN)

    def axes(self, xlabel: str = "", ylabel: str = "") -> None:
        l, r, b, t = MARGIN, self.w - MARGIN, self.h - MARGIN, MARGIN
        self.parts.append(f'<path d="M{l},{t} L{l},{b} L{r},{b}" stroke="black" fill="none"/>')
        for v, anchor in ((self.x0, "start"), (self.x1, "end")):
            self.parts.append(f'<text x="{self.px(v):.1f}" y="{b + 15}" text-anchor="{anchor}" font-size="10">{v:.4g}</text>')
        for v in (self.y0, self.y1):
            self.parts.append(f'<text x="{l - 4}" y="{self.py(v):.1f}" text-anchor="end" font-size="10">{v:.4g}</text>')
        if xlabel:
            self.parts.append(f'<text x="{self.w / 2:.1f}" y="{self.h - 12}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
        if ylabel:
            self.parts.append(
                f'<text x="14" y="{self.h / 2:.1f}" text-anchor="middle" font-size="11" '
                f'transform="rotate(-90 14 {self.h / 2:.1f})">{escape(ylabel)}</text>'
            )

    def legend(self, entries: Sequence[tuple[str, str]]) -> None:
        for i, (name, color) in enumerate(entries[:24]):
            y = MARGIN + 12 * i
            x = self.w - MARGIN + 5
            self.parts.append(f'<rect x="{x}" y="{y - 7}" width="8" height="8" fill="{color}"/>')
            self.parts.append(f'<text x="{x + 11}" y="{y}" font-size="9">{escape(name)}</text>')

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n", encoding="utf-8")


def _lim(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 1.0
    return float(arr.min()), float(arr.max())


def scatter(xy: np.ndarray, labels: Sequence, path: str | Path, title: str = "") -> int:
    """Colored scatter; returns the number of distinct colors used."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    uniq = sorted(set(labels), key=lambda v: (str(type(v)), v))
    c = _Canvas(_lim(xy[:, 0]), _lim(xy[:, 1]), title, width=W + 80)
    c.axes()
    for (x, y), lab in zip(xy, labels):
        c.parts.append(f'<circle cx="{c.px(x):.2f}" cy="{c.py(y):.2f}" r="1.6" fill="{color_for(lab, uniq)}"/>')
    c.legend([("N/A" if lab == 100 else str(lab), color_for(lab, uniq)) for lab in uniq])
    c.save(path)
    return len({color_for(lab, uniq) for lab in uniq})


def lines(
    series: Mapping[str, Sequence[float]],
    path: str | Path,
    title: str = "",
    xlabel: str = "minute",
    ylabel: str = "",
    spans: Sequence[tuple[int, int]] = (),
    markers: Sequence[int] = (),
) -> None:
    """Line chart over index positions; ``spans`` alternate two shades."""
    allv = np.concatenate([np.asarray(v, dtype=float) for v in series.values()]) if series else np.zeros(0)
    n = max((len(v) for v in series.values()), default=1)
    c = _Canvas((0, max(n - 1, 1)), (min(0.0, _lim(allv)[0]), _lim(allv)[1]), title, width=W + 80)
    for i, (s, e) in enumerate(spans):
        fill = "#cfe3f7" if i % 2 == 0 else "#f7cfe3"
        x0, x1 = c.px(s), c.px(max(e - 1, s))
        c.parts.append(
            f'<rect x="{x0:.2f}" y="{MARGIN}" width="{max(x1 - x0, 1):.2f}" height="{c.h - 2 * MARGIN}" fill="{fill}"/>'
        )
    c.axes(xlabel, ylabel)
    for m in markers:
        c.parts.append(f'<line x1="{c.px(m):.2f}" y1="{MARGIN}" x2="{c.px(m):.2f}" y2="{c.h - MARGIN}" stroke="black" stroke-dasharray="4 3"/>')
    names = list(series)
    for i, name in enumerate(names):
        vals = np.asarray(series[name], dtype=float)
        pts = " ".join(f"{c.px(x):.2f},{c.py(y):.2f}" for x, y in enumerate(vals))
        c.parts.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.2"/>')
    c.legend([(n, PALETTE[i % len(PALETTE)]) for i, n in enumerate(names)])
    c.save(path)


def bars(edges: Sequence[float], counts: Sequence[float], path: str | Path, title: str = "", xlabel: str = "", ylabel: str = "count") -> None:
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    c = _Canvas(_lim(edges), (0.0, max(float(counts.max(initial=0.0)), 1.0)), title)
    c.axes(xlabel, ylabel)
    for lo, hi, v in zip(edges[:-1], edges[1:], counts):
        if v <= 0:
            continue
        x0, x1, y = c.px(lo), c.px(hi), c.py(v)
        c.parts.append(
            f'<rect x="{x0:.2f}" y="{y:.2f}" width="{max(x1 - x0, 0.5):.2f}" height="{c.py(0) - y:.2f}" fill="#1f77b4"/>'
        )
    c.save(path)


def graph(
    pos: Mapping[str, tuple[float, float]],
    edges: Sequence[tuple[str, str]],
    degree: Mapping[str, int],
    path: str | Path,
    title: str = "",
) -> None:
    """Node-link drawing; node radius is proportional to total degree."""
    xs = [p[0] for p in pos.values()]
    ys = [p[1] for p in pos.values()]
    c = _Canvas(_lim(xs), _lim(ys), title, width=H + 100, height=H + 100)
    for u, v in edges:
        (x0, y0), (x1, y1) = pos[u], pos[v]
        c.parts.append(
            f'<line x1="{c.px(x0):.2f}" y1="{c.py(y0):.2f}" x2="{c.px(x1):.2f}" y2="{c.py(y1):.2f}" stroke="#999" stroke-width="0.5"/>'
        )
    top = max(degree.values(), default=1) or 1
    for node in sorted(pos):
        x, y = pos[node]
        r = max(1.0, 12.0 * degree.get(node, 0) / top)
        c.parts.append(f'<circle cx="{c.px(x):.2f}" cy="{c.py(y):.2f}" r="{r:.2f}" fill="#d62728"/>')
    c.save(path)
