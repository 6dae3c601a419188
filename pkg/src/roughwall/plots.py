"""Standalone SVG line charts (log-log and semi-log) without plotting dependencies."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 180, 40, 60


def _ticks(lo: float, hi: float) -> list[float]:
    """Decade ticks covering ``[lo, hi]`` in log10 units."""
    a, b = math.floor(lo), math.ceil(hi)
    step = max(1, (b - a) // 8)
    return list(range(a, b + 1, step))


class _Frame:
    def __init__(self, xs, ys, logx: bool, logy: bool):
        self.logx, self.logy = logx, logy
        tx = [self.fx(v) for v in xs]
        ty = [self.fy(v) for v in ys]
        self.x0, self.x1 = min(tx), max(tx)
        self.y0, self.y1 = min(ty), max(ty)
        if self.logx:
            self.x0, self.x1 = math.floor(self.x0 * 4) / 4, math.ceil(self.x1 * 4) / 4
        if self.logy:
            self.y0, self.y1 = math.floor(self.y0), math.ceil(self.y1)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def fx(self, v):
        return math.log10(v) if self.logx else v

    def fy(self, v):
        return math.log10(v) if self.logy else v

    def px(self, t):
        return LEFT + (t - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, t):
        return H - BOTTOM - (t - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" fill="none" stroke="#333"/>',
        f'<text x="{(W - RIGHT + LEFT) / 2:.1f}" y="{TOP - 14}" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{(W - RIGHT + LEFT) / 2:.1f}" y="{H - 18}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
        f'<text x="18" y="{(H - BOTTOM + TOP) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(H - BOTTOM + TOP) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    if fr.logy:
        for k in _ticks(fr.y0, fr.y1):
            if fr.y0 <= k <= fr.y1:
                y = fr.py(k)
                out.append(f'<line x1="{LEFT}" y1="{y:.1f}" x2="{W - RIGHT}" y2="{y:.1f}" stroke="#ddd"/>')
                out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">1e{k}</text>')
    else:
        for i in range(6):
            t = fr.y0 + i * (fr.y1 - fr.y0) / 5
            y = fr.py(t)
            out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{t:.3g}</text>')
    for i in range(6):
        t = fr.x0 + i * (fr.x1 - fr.x0) / 5
        x = fr.px(t)
        label = f"{10**t:.3g}" if fr.logx else f"{t:.3g}"
        out.append(f'<text x="{x:.1f}" y="{H - BOTTOM + 18}" text-anchor="middle" font-size="11">{label}</text>')
    return out


def _polyline(fr: _Frame, xs, ys, color: str, dash: str | None = None, markers: bool = True) -> list[str]:
    pts = " ".join(f"{fr.px(fr.fx(x)):.2f},{fr.py(fr.fy(y)):.2f}" for x, y in zip(xs, ys))
    style = f' stroke-dasharray="{dash}"' if dash else ""
    out = [f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"{style}/>']
    if markers:
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{fr.px(fr.fx(x)):.2f}" cy="{fr.py(fr.fy(y)):.2f}" r="3" fill="{color}"/>')
    return out


def _legend(entries: list[tuple[str, str, str | None]]) -> list[str]:
    out = []
    for k, (label, color, dash) in enumerate(entries):
        y = TOP + 14 + 18 * k
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{y}" x2="{W - RIGHT + 36}" y2="{y}" stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{W - RIGHT + 42}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    return out


def _write(path, body: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">\n')
        fh.write('<rect width="100%" height="100%" fill="white"/>\n')
        for line in body:
            fh.write(line + "\n")
        fh.write("</svg>\n")


def loglog_plot(path, series: dict[str, tuple[list[float], list[float]]], title: str, xlabel: str = "eps",
                ylabel: str = "error", guides: tuple[float, ...] = (1.5, 2.0)) -> None:
    """Log-log chart of positive series with reference slope lines anchored at the first series."""
    series = {k: v for k, v in series.items() if v[0] and all(y > 0 for y in v[1])}
    xs = [x for v in series.values() for x in v[0]]
    ys = [y for v in series.values() for y in v[1]]
    if not xs:
        _write(path, [f'<text x="20" y="40">{escape(title)}: no positive data</text>'])
        return
    anchor = next(iter(series.values()))
    xa, ya = max(anchor[0]), anchor[1][anchor[0].index(max(anchor[0]))]
    lo = min(xs)
    guide_pts = {s: ([xa, lo], [ya, ya * (lo / xa) ** s]) for s in guides}
    fr = _Frame(xs + [x for g in guide_pts.values() for x in g[0]], ys + [y for g in guide_pts.values() for y in g[1]], True, True)
    body = _axes(fr, title, xlabel, ylabel)
    legend = []
    for k, (name, (x, y)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        body += _polyline(fr, x, y, color)
        legend.append((name, color, None))
    for s, (gx, gy) in guide_pts.items():
        body += _polyline(fr, gx, gy, "#888", dash="6,4", markers=False)
        legend.append((f"slope {s:g}", "#888", "6,4"))
    _write(path, body + _legend(legend))


def semilogy_plot(path, series: dict[str, tuple[list[float], list[float]]], title: str, xlabel: str, ylabel: str) -> None:
    """Linear x, logarithmic y; nonpositive values are skipped."""
    clean = {}
    for k, (x, y) in series.items():
        pts = [(a, b) for a, b in zip(x, y) if b > 0]
        if pts:
            clean[k] = ([a for a, _ in pts], [b for _, b in pts])
    if not clean:
        _write(path, [f'<text x="20" y="40">{escape(title)}: no positive data</text>'])
        return
    fr = _Frame([a for v in clean.values() for a in v[0]], [b for v in clean.values() for b in v[1]], False, True)
    body = _axes(fr, title, xlabel, ylabel)
    legend = []
    for k, (name, (x, y)) in enumerate(clean.items()):
        color = PALETTE[k % len(PALETTE)]
        body += _polyline(fr, x, y, color, markers=len(x) <= 40)
        legend.append((name, color, None))
    _write(path, body + _legend(legend))
