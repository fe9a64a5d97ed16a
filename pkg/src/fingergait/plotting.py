"""Standalone SVG line plots for experiment CSV outputs.

The experiment commands write plain CSV files (planner coverage curves,
training metrics, per-episode evaluations).  This module renders them as
self-contained SVG documents with no third-party plotting dependency:

* one input file  -> a single polyline of that series;
* several files   -> the per-x **median** polyline plus a shaded band that
  spans the per-x minimum and maximum exactly (no smoothing, no quantile
  interpolation), which is the right summary for a handful of seeds.

Series are aligned by exact x value.  Files from the same experiment share
an x grid, but ragged tails (for example coverage curves of different
lengths) are fine: each x uses whatever series reach it.

Rows whose y field is empty or NaN are skipped (training logs only fill
the evaluation column every few updates); anything else that fails to
parse raises :class:`~fingergait.errors.ConfigError` with the offending
file and line number.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import median
from typing import Dict, List, Sequence, Tuple

from .errors import ConfigError

#: kind -> (x column, y column, x axis label, y axis label)
PLOT_KINDS: Dict[str, Tuple[str, str, str, str]] = {
    "coverage": ("iteration", "max_rotation",
                 "planner iteration", "max rotation [rad]"),
    "training": ("env_steps", "eval_rotation",
                 "environment steps", "eval rotation [rad]"),
    "eval": ("episode", "rotation",
             "episode", "cumulative rotation [rad]"),
}

# Fixed canvas geometry (pixels).
_WIDTH, _HEIGHT = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 64, 16, 34, 46


@dataclass
class Series:
    """One CSV reduced to parallel x/y arrays."""

    label: str
    xs: List[float]
    ys: List[float]


def read_series(path: str, x_column: str, y_column: str) -> Series:
    """Load one CSV as a series; report malformed rows with line numbers."""
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    with fh:
        lineno = 0
        header: List[str] = []
        while True:
            line = fh.readline()
            if not line:
                raise ConfigError(f"{path}: no header row found")
            lineno += 1
            if line.startswith("#") or not line.strip():
                continue
            header = next(csv.reader([line]))
            break
        for column in (x_column, y_column):
            if column not in header:
                raise ConfigError(
                    f"{path}:{lineno}: no column {column!r} in header "
                    f"({', '.join(header)})")
        xi, yi = header.index(x_column), header.index(y_column)
        xs: List[float] = []
        ys: List[float] = []
        for row in csv.reader(fh):
            lineno += 1
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].startswith("#"):
                continue
            if len(row) != len(header):
                raise ConfigError(
                    f"{path}:{lineno}: expected {len(header)} fields, "
                    f"got {len(row)}")
            try:
                x = float(row[xi])
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: bad {x_column} value "
                    f"{row[xi]!r}") from None
            raw_y = row[yi].strip()
            if raw_y == "":
                continue
            try:
                y = float(raw_y)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: bad {y_column} value "
                    f"{raw_y!r}") from None
            if math.isnan(y):
                continue
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ConfigError(f"{path}: no plottable rows "
                          f"({x_column!r} vs {y_column!r})")
    return Series(label=path, xs=xs, ys=ys)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    """Round tick positions on a 1/2/5 ladder covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(value: float) -> str:
    text = f"{value:.6g}"
    return "0" if text == "-0" else text


def _band_and_median(series: Sequence[Series]
                     ) -> Tuple[List[float], List[float], List[float],
                                List[float]]:
    """Per-x aggregation: sorted xs, medians, minima, maxima."""
    buckets: Dict[float, List[float]] = {}
    for s in series:
        for x, y in zip(s.xs, s.ys):
            buckets.setdefault(x, []).append(y)
    xs = sorted(buckets)
    med = [median(buckets[x]) for x in xs]
    lo = [min(buckets[x]) for x in xs]
    hi = [max(buckets[x]) for x in xs]
    return xs, med, lo, hi


def render_line_plot(series: Sequence[Series], title: str = "",
                     x_label: str = "", y_label: str = "") -> str:
    """Render series to a standalone SVG document string."""
    if not series:
        raise ConfigError("no input series to plot")
    xs, med, lo, hi = _band_and_median(series)

    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(lo), max(hi)
    if x_max <= x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    if y_max <= y_min:
        y_min, y_max = y_min - 0.5, y_max + 0.5
    pad = 0.04 * (y_max - y_min)
    y_min, y_max = y_min - pad, y_max + pad

    inner_w = _WIDTH - _LEFT - _RIGHT
    inner_h = _HEIGHT - _TOP - _BOTTOM

    def px(x: float) -> float:
        return _LEFT + (x - x_min) / (x_max - x_min) * inner_w

    def py(y: float) -> float:
        return _TOP + (y_max - y) / (y_max - y_min) * inner_h

    def points(pairs) -> str:
        return " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pairs)

    out: List[str] = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" '
               f'width="{_WIDTH}" height="{_HEIGHT}" '
               f'viewBox="0 0 {_WIDTH} {_HEIGHT}">')
    out.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')

    # Grid and tick labels.
    for t in _nice_ticks(x_min, x_max):
        if not x_min <= t <= x_max:
            continue
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{_TOP}" x2="{x:.2f}" '
                   f'y2="{_TOP + inner_h}" stroke="#dddddd"/>')
        out.append(f'<text x="{x:.2f}" y="{_TOP + inner_h + 18}" '
                   f'font-size="12" text-anchor="middle" '
                   f'fill="#333333">{_fmt(t)}</text>')
    for t in _nice_ticks(y_min, y_max):
        if not y_min <= t <= y_max:
            continue
        y = py(t)
        out.append(f'<line x1="{_LEFT}" y1="{y:.2f}" '
                   f'x2="{_LEFT + inner_w}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{y + 4:.2f}" font-size="12" '
                   f'text-anchor="end" fill="#333333">{_fmt(t)}</text>')

    # Min-max band (only when several series disagree somewhere).
    if len(series) > 1:
        ring = list(zip(xs, hi)) + list(zip(reversed(xs), reversed(lo)))
        out.append(f'<polygon points="{points(ring)}" fill="#bfd4ef" '
                   f'fill-opacity="0.7" stroke="none"/>')

    out.append(f'<polyline points="{points(zip(xs, med))}" fill="none" '
               f'stroke="#1f5fa8" stroke-width="2"/>')

    # Frame, labels, title.
    out.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{inner_w}" '
               f'height="{inner_h}" fill="none" stroke="#333333"/>')
    if x_label:
        out.append(f'<text x="{_LEFT + inner_w / 2:.2f}" '
                   f'y="{_HEIGHT - 10}" font-size="13" text-anchor="middle" '
                   f'fill="#111111">{x_label}</text>')
    if y_label:
        cx, cy = 16, _TOP + inner_h / 2
        out.append(f'<text x="{cx}" y="{cy:.2f}" font-size="13" '
                   f'text-anchor="middle" fill="#111111" '
                   f'transform="rotate(-90 {cx} {cy:.2f})">{y_label}</text>')
    if title:
        out.append(f'<text x="{_WIDTH / 2}" y="20" font-size="14" '
                   f'text-anchor="middle" fill="#111111">{title}</text>')
    if len(series) > 1:
        out.append(f'<text x="{_LEFT + inner_w - 6}" y="{_TOP + 16}" '
                   f'font-size="11" text-anchor="end" fill="#555555">'
                   f'median of {len(series)} series, min-max band</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def write_plot(csv_paths: Sequence[str], kind: str, out_path: str,
               title: str = "") -> None:
    """Read CSVs for the given plot kind and write the SVG file."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; "
                          f"choices: {', '.join(sorted(PLOT_KINDS))}")
    if not csv_paths:
        raise ConfigError("no input CSV files given")
    x_col, y_col, x_label, y_label = PLOT_KINDS[kind]
    series = [read_series(p, x_col, y_col) for p in csv_paths]
    svg = render_line_plot(series, title=title or kind,
                           x_label=x_label, y_label=y_label)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
