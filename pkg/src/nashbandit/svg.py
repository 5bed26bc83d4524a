"""Hand-emitted SVG charts (no plotting dependency).

Deterministic string assembly so chart files are byte-stable and can be
golden-tested.  Supports line charts (regret curves) and scatter plots
(round-wise pulled means), linear or log-log.
"""

from __future__ import annotations

import math

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 24, 40, 48
_PLOT_W, _PLOT_H = 560, 320
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(t)
        t += step
    return ticks


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi, log_x=False, log_y=False):
        self.log_x, self.log_y = log_x, log_y
        self.xlo = math.log10(xlo) if log_x else xlo
        self.xhi = math.log10(xhi) if log_x else xhi
        self.ylo = math.log10(ylo) if log_y else ylo
        self.yhi = math.log10(yhi) if log_y else yhi
        if self.xhi <= self.xlo:
            self.xhi = self.xlo + 1.0
        if self.yhi <= self.ylo:
            self.yhi = self.ylo + 1.0

    def x(self, v):
        v = math.log10(v) if self.log_x else v
        return _MARGIN_L + (v - self.xlo) / (self.xhi - self.xlo) * _PLOT_W

    def y(self, v):
        v = math.log10(v) if self.log_y else v
        return _MARGIN_T + _PLOT_H - (v - self.ylo) / (self.yhi - self.ylo) * _PLOT_H


def _axes(frame, title, xlabel, ylabel):
    out = []
    out.append(f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{_PLOT_W}" height="{_PLOT_H}" '
               'fill="none" stroke="#333" stroke-width="1"/>')
    out.append(f'<text x="{_MARGIN_L + _PLOT_W / 2}" y="22" text-anchor="middle" '
               f'font-size="14" fill="#111">{title}</text>')
    out.append(f'<text x="{_MARGIN_L + _PLOT_W / 2}" y="{_MARGIN_T + _PLOT_H + 36}" '
               f'text-anchor="middle" font-size="12" fill="#333">{xlabel}</text>')
    out.append(f'<text x="16" y="{_MARGIN_T + _PLOT_H / 2}" text-anchor="middle" font-size="12" '
               f'fill="#333" transform="rotate(-90,16,{_MARGIN_T + _PLOT_H / 2})">{ylabel}</text>')
    for tv in _ticks(frame.xlo, frame.xhi):
        px = _MARGIN_L + (tv - frame.xlo) / (frame.xhi - frame.xlo) * _PLOT_W
        label = _fmt(10**tv) if frame.log_x else _fmt(tv)
        out.append(f'<line x1="{px:.1f}" y1="{_MARGIN_T + _PLOT_H}" x2="{px:.1f}" '
                   f'y2="{_MARGIN_T + _PLOT_H + 5}" stroke="#333"/>')
        out.append(f'<text x="{px:.1f}" y="{_MARGIN_T + _PLOT_H + 18}" text-anchor="middle" '
                   f'font-size="10" fill="#333">{label}</text>')
    for tv in _ticks(frame.ylo, frame.yhi):
        py = _MARGIN_T + _PLOT_H - (tv - frame.ylo) / (frame.yhi - frame.ylo) * _PLOT_H
        label = _fmt(10**tv) if frame.log_y else _fmt(tv)
        out.append(f'<line x1="{_MARGIN_L - 5}" y1="{py:.1f}" x2="{_MARGIN_L}" y2="{py:.1f}" stroke="#333"/>')
        out.append(f'<line x1="{_MARGIN_L}" y1="{py:.1f}" x2="{_MARGIN_L + _PLOT_W}" y2="{py:.1f}" '
                   'stroke="#eee" stroke-width="1"/>')
        out.append(f'<text x="{_MARGIN_L - 8}" y="{py + 3:.1f}" text-anchor="end" '
                   f'font-size="10" fill="#333">{label}</text>')
    return out


def _document(body) -> str:
    w = _MARGIN_L + _PLOT_W + _MARGIN_R
    h = _MARGIN_T + _PLOT_H + _MARGIN_B
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" '
            'font-family="sans-serif">\n'
            f'<rect width="{w}" height="{h}" fill="#ffffff"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def line_chart(series, title="", xlabel="round", ylabel="regret", log_log=False) -> str:
    """``series`` maps label -> list of (x, y) with positive x, y if log_log."""
    pts = [p for ps in series.values() for p in ps]
    if not pts:
        raise ValueError("no data to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    floor = 1e-12
    if log_log:
        xs = [max(x, floor) for x in xs]
        ys = [max(y, floor) for y in ys]
    frame = _Frame(min(xs), max(xs), min(ys) if not log_log else max(min(ys), floor),
                   max(ys), log_x=log_log, log_y=log_log)
    body = _axes(frame, title, xlabel, ylabel)
    for k, (label, points) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        coords = " ".join(
            f"{frame.x(max(x, floor) if log_log else x):.1f},"
            f"{frame.y(max(y, floor) if log_log else y):.1f}"
            for x, y in points)
        body.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MARGIN_T + 14 + 14 * k
        lx = _MARGIN_L + _PLOT_W - 150
        body.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                    f'stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 24}" y="{ly}" font-size="11" fill="#333">{label}</text>')
    return _document(body)


def scatter_chart(series, title="", xlabel="round", ylabel="pulled mean") -> str:
    """``series`` maps label -> list of (x, y) point clouds (already downsampled)."""
    pts = [p for ps in series.values() for p in ps]
    if not pts:
        raise ValueError("no data to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    frame = _Frame(min(xs), max(xs), min(ys), max(ys))
    body = _axes(frame, title, xlabel, ylabel)
    for k, (label, points) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        for x, y in points:
            body.append(f'<circle cx="{frame.x(x):.1f}" cy="{frame.y(y):.1f}" r="1.4" '
                        f'fill="{color}" fill-opacity="0.45"/>')
        ly = _MARGIN_T + 14 + 14 * k
        lx = _MARGIN_L + _PLOT_W - 150
        body.append(f'<circle cx="{lx + 8}" cy="{ly - 4}" r="3" fill="{color}"/>')
        body.append(f'<text x="{lx + 24}" y="{ly}" font-size="11" fill="#333">{label}</text>')
    return _document(body)
