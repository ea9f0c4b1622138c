"""Minimal SVG scatter and line charts.

Each ``plot_*`` function reads one CSV written by the CLI and renders it, so
figures can be rebuilt offline from the CSV alone.
"""

from __future__ import annotations

import csv
import math
from xml.sax.saxutils import escape

W, H = 480, 360
PAD = 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.3g}"


class Canvas:
    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        self.x0, self.x1 = _pad_range(*xlim)
        self.y0, self.y1 = _pad_range(*ylim)
        self.parts: list[str] = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.legend: list[tuple[str, str]] = []

    def px(self, x: float) -> float:
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, y: float) -> float:
        return H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def points(self, xs, ys, color, r=2.0, label=None):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{_fmt(self.px(x))}" cy="{_fmt(self.py(y))}" r="{r}" fill="{color}"/>')
        if label:
            self.legend.append((label, color))

    def line(self, xs, ys, color, label=None, markers=True):
        pts = " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if markers:
            self.points(xs, ys, color, r=2.5)
        if label:
            self.legend.append((label, color))

    def _axes(self) -> list[str]:
        out = [
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#444"/>'
        ]
        for i in range(5):
            fx = self.x0 + (self.x1 - self.x0) * i / 4
            fy = self.y0 + (self.y1 - self.y0) * i / 4
            out.append(f'<text x="{_fmt(self.px(fx))}" y="{H - PAD + 14}" font-size="10" '
                       f'text-anchor="middle">{_tick(fx)}</text>')
            out.append(f'<text x="{PAD - 4}" y="{_fmt(self.py(fy) + 3)}" font-size="10" '
                       f'text-anchor="end">{_tick(fy)}</text>')
        out.append(f'<text x="{W / 2}" y="{PAD / 2}" font-size="13" text-anchor="middle">{escape(self.title)}</text>')
        out.append(f'<text x="{W / 2}" y="{H - 10}" font-size="11" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="12" y="{H / 2}" font-size="11" text-anchor="middle" '
                   f'transform="rotate(-90 12 {H / 2})">{escape(self.ylabel)}</text>')
        for j, (label, color) in enumerate(self.legend):
            y = PAD + 12 + 14 * j
            out.append(f'<rect x="{W - PAD - 110}" y="{y - 8}" width="8" height="8" fill="{color}"/>')
            out.append(f'<text x="{W - PAD - 98}" y="{y}" font-size="10">{escape(label)}</text>')
        return out

    def render(self) -> str:
        body = "\n".join(self.parts + self._axes())
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                f'viewBox="0 0 {W} {H}">\n<rect width="{W}" height="{H}" fill="white"/>\n{body}\n</svg>\n')

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def _pad_range(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return 0.0, 1.0
    if hi <= lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - 0.05 * span, hi + 0.05 * span


def _read(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _lim(vals):
    vals = [v for v in vals if math.isfinite(v)]
    return (min(vals), max(vals)) if vals else (0.0, 1.0)


# --- CSV-driven figures ----------------------------------------------------------


def plot_wild_scatter(csv_path, svg_path, color_by: str, title: str) -> None:
    """Scatter of the wild set.

    ``color_by="origin"`` colours by ground truth; ``color_by="flagged"`` draws
    flagged rows in black over grey survivors.
    """
    rows = _read(csv_path)
    xs = [float(r["x0"]) for r in rows]
    ys = [float(r["x1"]) for r in rows]
    cv = Canvas(_lim(xs), _lim(ys), title, "x0", "x1")
    if color_by == "origin":
        groups = (("0", PALETTE[0], "InD"), ("1", PALETTE[1], "OOD"))
        key = "__origin"
    else:
        groups = (("0", "#bbbbbb", "kept"), ("1", "#000000", "flagged"))
        key = "flagged"
    for val, color, label in groups:
        sel = [i for i, r in enumerate(rows) if r[key] == val]
        cv.points([xs[i] for i in sel], [ys[i] for i in sel], color, label=label)
    cv.save(svg_path)


def plot_lines(csv_path, svg_path, x: str, y: str, group: str | None, title: str) -> None:
    """Line chart of column ``y`` against ``x``, one line per value of ``group``."""
    rows = _read(csv_path)
    keys = sorted({r[group] for r in rows}) if group else [None]
    xs_all = [float(r[x]) for r in rows]
    ys_all = [float(r[y]) for r in rows if r[y] != ""]
    cv = Canvas(_lim(xs_all), _lim(ys_all), title, x, y)
    for j, key in enumerate(keys):
        sel = [r for r in rows if group is None or r[group] == key]
        sel = [r for r in sel if r[y] != ""]
        cv.line([float(r[x]) for r in sel], [float(r[y]) for r in sel], PALETTE[j % len(PALETTE)], label=key)
    cv.save(svg_path)
