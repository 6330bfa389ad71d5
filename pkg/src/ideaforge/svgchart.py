"""Dependency-free SVG charts: trajectory lines, topic-count sweep curves,
and burst timelines. Output is self-contained (inline styling, no external
assets) and deterministic (fixed-precision coordinates)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .burst import BurstInterval
from .dynamics import TimeSeries
from .errors import ConfigError

WIDTH = 720
HEIGHT = 420
MARGIN_LEFT = 64
MARGIN_RIGHT = 24
MARGIN_TOP = 28
MARGIN_BOTTOM = 48

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")

_AXIS_STYLE = 'stroke="#333333" stroke-width="1"'
_GRID_STYLE = 'stroke="#dddddd" stroke-width="0.5"'
_TEXT = 'font-family="sans-serif" font-size="11" fill="#333333"'


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12:
        ticks.append(round(v, 12))
        v += step
    return ticks


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" fill="#333333">'
            f'{escape(title)}</text>',
        ]

    def line(self, x1, y1, x2, y2, style=_AXIS_STYLE):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" {style}/>')

    def text(self, x, y, s, anchor="middle", extra=""):
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
            f'{_TEXT} {extra}>{escape(s)}</text>')

    def polyline(self, points, color):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{pts}"/>')

    def circle(self, x, y, r, color, fill="none"):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" stroke="{color}" '
            f'fill="{fill}" stroke-width="1.5"/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{color}"/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _check_series(series: list[TimeSeries]):
    if not series:
        raise ConfigError("at least one series is required")
    for s in series:
        if not s.years:
            raise ConfigError(f"series {s.label!r} is empty")
        if any(not math.isfinite(v) for v in s.values):
            raise ConfigError(f"series {s.label!r} has non-finite values")


def _scales(x_lo, x_hi, y_lo, y_hi):
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + (abs(y_lo) if y_lo else 1.0)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return HEIGHT - MARGIN_BOTTOM - (y - y_lo) / (y_hi - y_lo) * plot_h

    return sx, sy, x_lo, x_hi, y_lo, y_hi


def _draw_axes(c: _Canvas, sx, sy, x_lo, x_hi, y_lo, y_hi, x_label, y_label,
               integer_x: bool = True):
    c.line(MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM, WIDTH - MARGIN_RIGHT,
           HEIGHT - MARGIN_BOTTOM)
    c.line(MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM)
    if integer_x:
        span = int(round(x_hi - x_lo))
        step = max(1, int(math.ceil(span / 10))) if span else 1
        xt = [x_lo + i for i in range(0, span + 1, step)]
    else:
        xt = _nice_ticks(x_lo, x_hi)
    for x in xt:
        px = sx(x)
        c.line(px, HEIGHT - MARGIN_BOTTOM, px, HEIGHT - MARGIN_BOTTOM + 4)
        c.text(px, HEIGHT - MARGIN_BOTTOM + 16,
               str(int(x)) if integer_x else f"{x:g}")
    for y in _nice_ticks(y_lo, y_hi):
        py = sy(y)
        c.line(MARGIN_LEFT, py, WIDTH - MARGIN_RIGHT, py, _GRID_STYLE)
        c.line(MARGIN_LEFT - 4, py, MARGIN_LEFT, py)
        c.text(MARGIN_LEFT - 8, py + 3, f"{y:g}", anchor="end")
    c.text((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2, HEIGHT - 8, x_label)
    c.text(14, MARGIN_TOP - 10, y_label, anchor="start")


def _legend(c: _Canvas, labels: list[str]):
    x = MARGIN_LEFT + 8
    y = MARGIN_TOP + 6
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        c.line(x, y + 12 * i, x + 16, y + 12 * i,
               f'stroke="{color}" stroke-width="2"')
        c.text(x + 22, y + 12 * i + 3, label, anchor="start")


def render_trajectory_chart(series: list[TimeSeries], title: str = "Term trajectories") -> str:
    _check_series(series)
    x_lo = min(min(s.years) for s in series)
    x_hi = max(max(s.years) for s in series)
    y_lo = min(0.0, min(min(s.values) for s in series))
    y_hi = max(max(s.values) for s in series)
    sx, sy, *bounds = _scales(x_lo, x_hi, y_lo, y_hi)
    c = _Canvas(title)
    _draw_axes(c, sx, sy, *bounds, "year", "probability")
    for i, s in enumerate(series):
        c.polyline([(sx(x), sy(y)) for x, y in zip(s.years, s.values)],
                   PALETTE[i % len(PALETTE)])
    _legend(c, [s.label or f"series {i}" for i, s in enumerate(series)])
    return c.render()


def render_sweep_chart(series: TimeSeries, selected: int,
                       title: str = "Model selection") -> str:
    """Metric vs topic count, with the selected count marked."""
    _check_series([series])
    x_lo, x_hi = min(series.years), max(series.years)
    y_lo, y_hi = min(series.values), max(series.values)
    sx, sy, *bounds = _scales(x_lo, x_hi, y_lo, y_hi)
    c = _Canvas(title)
    _draw_axes(c, sx, sy, *bounds, "topic count", series.label or "score")
    pts = [(sx(x), sy(y)) for x, y in zip(series.years, series.values)]
    c.polyline(pts, PALETTE[0])
    for (px, py) in pts:
        c.circle(px, py, 2.5, PALETTE[0], fill=PALETTE[0])
    if selected in series.years:
        i = series.years.index(selected)
        c.circle(pts[i][0], pts[i][1], 6, PALETTE[1])
        c.text(pts[i][0], pts[i][1] - 10, f"selected K={selected}")
    return c.render()


def render_burst_timeline(intervals: list[BurstInterval], year_min: int,
                          year_max: int, title: str = "Term bursts") -> str:
    """Horizontal bars, one row per interval, in the given (ranked) order."""
    if not intervals:
        raise ConfigError("at least one burst interval is required")
    row_h = 16
    height = MARGIN_TOP + MARGIN_BOTTOM + row_h * len(intervals)
    span = max(year_max - year_min, 1)
    label_w = 150
    plot_w = WIDTH - label_w - MARGIN_RIGHT

    def sx(year):
        return label_w + (year - year_min) / span * plot_w

    c = _Canvas(title)
    c.parts[0] = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                  f'height="{height}" viewBox="0 0 {WIDTH} {height}">')
    c.parts[1] = (f'<rect x="0" y="0" width="{WIDTH}" height="{height}" '
                  f'fill="#ffffff"/>')
    step = max(1, (span + 1) // 10)
    for year in range(year_min, year_max + 1, step):
        px = sx(year)
        c.line(px, MARGIN_TOP, px, height - MARGIN_BOTTOM, _GRID_STYLE)
        c.text(px, height - MARGIN_BOTTOM + 16, str(year))
    for i, b in enumerate(intervals):
        y = MARGIN_TOP + row_h * i
        c.text(label_w - 8, y + row_h - 5, b.term, anchor="end")
        x1 = sx(b.start_year)
        # a one-year burst still gets a visible bar up to the next year mark
        x2 = sx(min(b.end_year + 1, year_max + 1) if b.end_year < year_max + 1 else b.end_year)
        x2 = max(x2, x1 + 2)
        color = PALETTE[1] if b.ongoing else PALETTE[0]
        c.rect(x1, y + 3, x2 - x1, row_h - 6, color)
    return c.render()


def render_svg_chart(kind: str, path, *, series: list[TimeSeries] | None = None,
                     sweep_series: TimeSeries | None = None,
                     selected: int | None = None,
                     intervals: list[BurstInterval] | None = None,
                     year_min: int | None = None, year_max: int | None = None,
                     title: str | None = None) -> None:
    """Dispatcher: kind is one of trajectory, sweep_curve, burst_timeline."""
    if kind == "trajectory":
        svg = render_trajectory_chart(series or [], title or "Term trajectories")
    elif kind == "sweep_curve":
        if sweep_series is None or selected is None:
            raise ConfigError("sweep_curve needs sweep_series and selected")
        svg = render_sweep_chart(sweep_series, selected, title or "Model selection")
    elif kind == "burst_timeline":
        if intervals is None or year_min is None or year_max is None:
            raise ConfigError("burst_timeline needs intervals and a year range")
        svg = render_burst_timeline(intervals, year_min, year_max,
                                    title or "Term bursts")
    else:
        raise ConfigError(f"unknown chart kind {kind!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
