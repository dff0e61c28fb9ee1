"""Minimal static SVG charts with ``<title>`` tooltips."""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

import numpy as np

from .plots import POINT_COLOR, ComparisonData, EvolutionData

WIDTH, HEIGHT = 860, 300
MARGIN = dict(left=70, right=20, top=20, bottom=40)


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


class Frame:
    """Linear data-to-pixel mapping plus axis drawing."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT):
        x0, x1 = xlim
        y0, y1 = ylim
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            pad = max(abs(y0) * 0.01, 0.5)
            y0, y1 = y0 - pad, y1 + pad
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.width, self.height = width, height
        self.pw = width - MARGIN["left"] - MARGIN["right"]
        self.ph = height - MARGIN["top"] - MARGIN["bottom"]

    def x(self, v: float) -> float:
        x0, x1 = self.xlim
        return MARGIN["left"] + (v - x0) / (x1 - x0) * self.pw

    def y(self, v: float) -> float:
        y0, y1 = self.ylim
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * self.ph

    def axes(self, xlabel: str = "", ylabel: str = "", xticks=None, xticklabels=None) -> list[str]:
        left, top = MARGIN["left"], MARGIN["top"]
        bottom = top + self.ph
        out = [f'<rect x="{left}" y="{top}" width="{self.pw}" height="{self.ph}" '
               f'fill="none" stroke="#999"/>']
        for t in nice_ticks(*self.ylim):
            yy = self.y(t)
            out.append(f'<line x1="{left - 4}" y1="{yy:.2f}" x2="{left + self.pw}" y2="{yy:.2f}" '
                       f'stroke="#eee"/>')
            out.append(f'<text x="{left - 6}" y="{yy + 4:.2f}" text-anchor="end" '
                       f'font-size="11">{_num(t)}</text>')
        ticks = xticks if xticks is not None else nice_ticks(*self.xlim)
        labels = xticklabels or [_num(t) for t in ticks]
        for t, label in zip(ticks, labels):
            xx = self.x(t)
            out.append(f'<line x1="{xx:.2f}" y1="{bottom}" x2="{xx:.2f}" y2="{bottom + 4}" stroke="#999"/>')
            out.append(f'<text x="{xx:.2f}" y="{bottom + 16}" text-anchor="middle" '
                       f'font-size="11">{escape(label)}</text>')
        if xlabel:
            out.append(f'<text x="{left + self.pw / 2:.2f}" y="{self.height - 4}" '
                       f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
        if ylabel:
            out.append(f'<text x="14" y="{top + self.ph / 2:.2f}" text-anchor="middle" font-size="12" '
                       f'transform="rotate(-90 14 {top + self.ph / 2:.2f})">{escape(ylabel)}</text>')
        return out

    def wrap(self, body: list[str], label: str) -> str:
        return (f'<svg width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}" role="img" aria-label="{escape(label)}">'
                + "".join(body) + "</svg>")


def _num(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.3g}"
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _limits(values: Sequence[float], pad: float = 0.05) -> tuple[float, float]:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    if not vals:
        return (0.0, 1.0)
    lo, hi = min(vals), max(vals)
    span = hi - lo
    return (lo - pad * span, hi + pad * span)


def _polyline(frame: Frame, xs, ys, color: str, width: float = 1.5, dash: str = "") -> str:
    pts = " ".join(f"{frame.x(x):.2f},{frame.y(y):.2f}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def _index_ticks(labels: Sequence[str], count: int = 6):
    n = len(labels)
    if n == 0:
        return [], []
    step = max(1, math.ceil(n / count))
    idx = list(range(0, n, step))
    return idx, [labels[i][:10] for i in idx]


def evolution_svg(data: EvolutionData) -> str:
    pts = data.points
    frame = Frame((-0.5, len(pts) - 0.5), _limits([p.aggregate for p in pts]))
    ticks, labels = _index_ticks([p.date for p in pts])
    body = frame.axes("commit (oldest to newest)", "energy (J)", ticks, labels)
    top, bottom = MARGIN["top"], MARGIN["top"] + frame.ph
    for m in data.markers:
        xx = frame.x(m.index)
        body.append(f'<line x1="{xx:.2f}" y1="{top}" x2="{xx:.2f}" y2="{bottom}" '
                    f'stroke="{m.bar_color}" stroke-width="2" opacity="0.6"/>')
    if len(pts) > 1:
        body.append(_polyline(frame, [p.index for p in pts], [p.aggregate for p in pts], "#c6dbef", 1))
    for p in pts:
        fill = "none" if p.outlier else POINT_COLOR
        body.append(f'<circle cx="{frame.x(p.index):.2f}" cy="{frame.y(p.aggregate):.2f}" r="3" '
                    f'fill="{fill}" stroke="{POINT_COLOR}"><title>{escape(p.commit_id[:7])} '
                    f'{escape(p.date)}: {p.aggregate:.2f} J{" (transient outlier)" if p.outlier else ""}'
                    f'</title></circle>')
    by_index = {p.index: p for p in pts}
    for m in data.markers:
        p = by_index[m.index]
        body.append(f'<circle cx="{frame.x(m.index):.2f}" cy="{frame.y(p.aggregate):.2f}" '
                    f'r="{m.ring_radius:.1f}" fill="none" stroke="{m.ring_color}" stroke-width="2">'
                    f'<title>{escape(m.commit_id[:7])}: level {m.level} {m.direction}</title></circle>')
    return frame.wrap(body, "evolution plot")


def cusum_svg(values: Sequence[float], dates: Sequence[str]) -> str:
    frame = Frame((0, max(len(values) - 1, 1)), _limits(values))
    ticks, labels = _index_ticks(["start", *dates])
    body = frame.axes("commit", "cumulative deviation (J)", ticks, labels)
    body.append(f'<line x1="{MARGIN["left"]}" y1="{frame.y(0):.2f}" x2="{MARGIN["left"] + frame.pw}" '
                f'y2="{frame.y(0):.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    body.append(_polyline(frame, range(len(values)), values, "#1f77b4", 2))
    return frame.wrap(body, "cusum plot")


def changepoint_svg(series: Sequence[float], change_points: Sequence[int], dates: Sequence[str]) -> str:
    n = len(series)
    frame = Frame((-0.5, n - 0.5), _limits(series))
    ticks, labels = _index_ticks(list(dates))
    body = frame.axes("commit", "aggregate energy (J)", ticks, labels)
    body.append(_polyline(frame, range(n), series, "#1f77b4", 1))
    bounds = [0, *change_points, n]
    arr = np.asarray(series, dtype=float)
    for a, b in zip(bounds, bounds[1:]):
        mean = float(arr[a:b].mean())
        body.append(f'<line x1="{frame.x(a - 0.5):.2f}" y1="{frame.y(mean):.2f}" x2="{frame.x(b - 0.5):.2f}" '
                    f'y2="{frame.y(mean):.2f}" stroke="#d62728" stroke-width="2">'
                    f'<title>segment {a}..{b - 1}: mean {mean:.2f} J</title></line>')
    for cp in change_points:
        xx = frame.x(cp - 0.5)
        body.append(f'<line x1="{xx:.2f}" y1="{MARGIN["top"]}" x2="{xx:.2f}" '
                    f'y2="{MARGIN["top"] + frame.ph}" stroke="#555" stroke-dasharray="5 4"/>')
    return frame.wrap(body, "change point plot")


def box_violin_svg(cmp: ComparisonData, width: int = 420, height: int = 300) -> str:
    grids = np.concatenate([v.grid for v in cmp.violin])
    frame = Frame((0, 2), (float(grids.min()), float(grids.max())), width, height)
    body = frame.axes("", "energy (J)", [0.5, 1.5], [cmp.baseline[:7], cmp.test[:7]])
    for k, (v, box) in enumerate(zip(cmp.violin, cmp.box)):
        cx = frame.x(0.5 + k)
        half = 0.4 * frame.pw / 2
        scale = half / float(v.density.max()) if v.density.max() > 0 else 0
        right = [f"{cx + d * scale:.2f},{frame.y(g):.2f}" for g, d in zip(v.grid, v.density)]
        left = [f"{cx - d * scale:.2f},{frame.y(g):.2f}" for g, d in zip(v.grid[::-1], v.density[::-1])]
        body.append(f'<polygon points="{" ".join(right + left)}" fill="#c6dbef" stroke="#6baed6"/>')
        bw = 0.08 * frame.pw
        body.append(f'<line x1="{cx:.2f}" y1="{frame.y(box.minimum):.2f}" x2="{cx:.2f}" '
                    f'y2="{frame.y(box.maximum):.2f}" stroke="#333"/>')
        body.append(f'<rect x="{cx - bw / 2:.2f}" y="{frame.y(box.q3):.2f}" width="{bw:.2f}" '
                    f'height="{max(frame.y(box.q1) - frame.y(box.q3), 0.5):.2f}" fill="#fff" stroke="#333">'
                    f'<title>min {box.minimum:.2f} / Q1 {box.q1:.2f} / median {box.median:.2f} / '
                    f'Q3 {box.q3:.2f} / max {box.maximum:.2f}</title></rect>')
        body.append(f'<line x1="{cx - bw / 2:.2f}" y1="{frame.y(box.median):.2f}" x2="{cx + bw / 2:.2f}" '
                    f'y2="{frame.y(box.median):.2f}" stroke="#d62728" stroke-width="2"/>')
    return frame.wrap(body, "box and violin plot")


def qq_svg(cmp: ComparisonData, width: int = 420, height: int = 300) -> str:
    xs = [a for a, _ in cmp.qq]
    ys = [b for _, b in cmp.qq]
    lim = _limits(xs + ys)
    frame = Frame(lim, lim, width, height)
    body = frame.axes(f"{cmp.baseline[:7]} quantiles (J)", f"{cmp.test[:7]} quantiles (J)")
    body.append(_polyline(frame, lim, lim, "#999", 1, "4 3"))
    for a, b in cmp.qq:
        body.append(f'<circle cx="{frame.x(a):.2f}" cy="{frame.y(b):.2f}" r="3" fill="{POINT_COLOR}">'
                    f'<title>{a:.2f} / {b:.2f}</title></circle>')
    return frame.wrap(body, "quantile-quantile plot")


def bootstrap_svg(cmp: ComparisonData, width: int = 420, height: int = 300) -> str:
    panel = cmp.bootstrap
    edges = panel.edges
    frame = Frame((edges[0], edges[-1]), (0, max(panel.counts) * 1.05 or 1), width, height)
    body = frame.axes("bootstrap delta of aggregates (J)", "resamples")
    for c, a, b in zip(panel.counts, edges, edges[1:]):
        if c == 0:
            continue
        body.append(f'<rect x="{frame.x(a):.2f}" y="{frame.y(c):.2f}" width="{max(frame.x(b) - frame.x(a), 0.5):.2f}" '
                    f'height="{frame.y(0) - frame.y(c):.2f}" fill="#9ecae1" stroke="#fff">'
                    f'<title>[{a:.3f}, {b:.3f}): {c}</title></rect>')
    for v, color in ((panel.ci95[0], "#d62728"), (panel.ci95[1], "#d62728"), (0.0, "#333")):
        if edges[0] <= v <= edges[-1]:
            body.append(f'<line x1="{frame.x(v):.2f}" y1="{MARGIN["top"]}" x2="{frame.x(v):.2f}" '
                        f'y2="{MARGIN["top"] + frame.ph}" stroke="{color}" stroke-dasharray="4 3"/>')
    return frame.wrap(body, "bootstrap plot")
