"""Minimal deterministic SVG line plots (no timestamps, fixed float formatting)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=78, right=24, top=36, bottom=56)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class Series:
    label: str
    points: tuple[tuple[float, float], ...]

    @classmethod
    def from_xy(cls, label: str, xs, ys) -> Series:
        return cls(label, tuple((float(x), float(y)) for x, y in zip(xs, ys)))


@dataclass(frozen=True)
class Axes:
    xlabel: str = "x"
    ylabel: str = "y"
    xscale: str = "linear"
    yscale: str = "linear"
    title: str = ""


def spans_decades(values, decades: float = 1.0) -> bool:
    """True when positive ``values`` cover at least ``decades`` powers of ten."""
    pos = [v for v in values if v > 0]
    return len(pos) >= 2 and math.log10(max(pos) / min(pos)) >= decades


def _num(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


class _Scale:
    def __init__(self, kind: str, lo: float, hi: float, a: float, b: float):
        if kind not in ("linear", "log"):
            raise PlotError(f"axis scale must be linear or log, got {kind!r}")
        self.kind = kind
        if kind == "log":
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            pad = abs(lo) * 0.05 or 1.0
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi, self.a, self.b = lo, hi, a, b

    def __call__(self, v: float) -> float:
        t = math.log10(v) if self.kind == "log" else v
        return self.a + (t - self.lo) / (self.hi - self.lo) * (self.b - self.a)

    def ticks(self) -> list[float]:
        if self.kind == "log":
            k0, k1 = math.floor(self.lo), math.ceil(self.hi)
            out = [10.0**k for k in range(k0, k1 + 1) if self.lo - 1e-9 <= k <= self.hi + 1e-9]
            if len(out) >= 2:
                return out
            return [10**self.lo, 10**self.hi]
        return [self.lo + (self.hi - self.lo) * k / 4 for k in range(5)]


def render_svg(series, axes: Axes = Axes()) -> str:
    series = list(series)
    if not series or any(not s.points for s in series):
        raise PlotError("need at least one non-empty series")
    xs = [x for s in series for x, _ in s.points]
    ys = [y for s in series for _, y in s.points]
    for scale, vals, name in ((axes.xscale, xs, "x"), (axes.yscale, ys, "y")):
        if scale == "log" and min(vals) <= 0:
            raise PlotError(f"log {name} axis needs positive values")
        if not all(math.isfinite(v) for v in vals):
            raise PlotError(f"non-finite {name} values")
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    sx = _Scale(axes.xscale, min(xs), max(xs), x0, x1)
    sy = _Scale(axes.yscale, min(ys), max(ys), y0, y1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>',
    ]
    for t in sx.ticks():
        px = _num(sx(t))
        out.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{y0 + 18}" text-anchor="middle">{_tick_label(t)}</text>')
    for t in sy.ticks():
        py = _num(sy(t))
        out.append(f'<line x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">'
                   f'{_tick_label(t)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 14}" text-anchor="middle">'
               f'{escape(axes.xlabel)}</text>')
    out.append(f'<text x="18" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y0 + y1) / 2:.2f})">{escape(axes.ylabel)}</text>')
    if axes.title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle">{escape(axes.title)}</text>')

    for k, s in enumerate(series):
        color = COLORS[k % len(COLORS)]
        pts = [(sx(x), sy(y)) for x, y in s.points]
        if len(pts) > 1:
            path = " ".join(f"{_num(px)},{_num(py)}" for px, py in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for px, py in pts:
            out.append(f'<circle cx="{_num(px)}" cy="{_num(py)}" r="3" fill="{color}"/>')

    if len(series) > 1:
        lx, ly = x1 - 170, y1 + 10
        out.append(f'<g class="legend">')
        for k, s in enumerate(series):
            color = COLORS[k % len(COLORS)]
            yy = ly + 18 * k
            out.append(f'<line x1="{lx}" y1="{yy + 6}" x2="{lx + 20}" y2="{yy + 6}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{lx + 26}" y="{yy + 10}">{escape(s.label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series, axes: Axes, path) -> Path:
    path = Path(path)
    path.write_text(render_svg(series, axes), newline="")
    return path
