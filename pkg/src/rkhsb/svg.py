"""Minimal self-contained SVG line plots (no plotting dependency)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
MARGIN = dict(left=70, right=180, top=30, bottom=50)
PALETTE = ["#1f77b4", "#2ca02c", "#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#17becf", "#bcbd22"]


def _fmt(v):
    return f"{v:.2f}"


class LinePlot:
    """Lines and shaded bands on shared axes, rendered to an SVG string."""

    def __init__(self, title="", xlabel="", ylabel="", logy=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.logy = logy
        self.items = []

    def line(self, x, y, label, dashed=False):
        self.items.append(("line", np.asarray(x, float), np.asarray(y, float), None, label, dashed))

    def band(self, x, lo, hi, label):
        self.items.append(("band", np.asarray(x, float), np.asarray(lo, float),
                           np.asarray(hi, float), label, False))

    def _limits(self):
        xs, ys = [], []
        for kind, x, a, b, _, _ in self.items:
            xs.append(x)
            ys.append(a)
            if b is not None:
                ys.append(b)
        x = np.concatenate(xs)
        y = self._ty(np.concatenate(ys))
        x, y = x[np.isfinite(x)], y[np.isfinite(y)]
        x0, x1 = (x.min(), x.max()) if x.size else (0.0, 1.0)
        y0, y1 = (y.min(), y.max()) if y.size else (0.0, 1.0)
        if x1 == x0:
            x1 = x0 + 1.0
        if y1 == y0:
            y1 = y0 + 1.0
        pad = 0.05 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def _ty(self, y):
        if not self.logy:
            return y
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0, np.log10(y), np.nan)

    def render(self):
        x0, x1, y0, y1 = self._limits()
        pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def px(x):
            return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

        def py(y):
            return MARGIN["top"] + (1.0 - (self._ty(y) - y0) / (y1 - y0)) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
               f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
               f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
               f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>']
        for t in np.linspace(x0, x1, 6):
            X = _fmt(px(t))
            out.append(f'<line x1="{X}" y1="{MARGIN["top"] + ph}" x2="{X}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(y0, y1, 6):
            Y = _fmt(MARGIN["top"] + (1.0 - (t - y0) / (y1 - y0)) * ph)
            lab = f"{10 ** t:.3g}" if self.logy else f"{t:.3g}"
            out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y}" x2="{MARGIN["left"]}" y2="{Y}" stroke="black"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">{lab}</text>')
        for i, (kind, x, a, b, label, dashed) in enumerate(self.items):
            color = PALETTE[i % len(PALETTE)]
            if kind == "band":
                ok = np.isfinite(a) & np.isfinite(b) & np.isfinite(self._ty(a)) & np.isfinite(self._ty(b))
                if ok.any():
                    top = " ".join(f"{_fmt(px(u))},{_fmt(py(v))}" for u, v in zip(x[ok], b[ok]))
                    bot = " ".join(f"{_fmt(px(u))},{_fmt(py(v))}" for u, v in zip(x[ok][::-1], a[ok][::-1]))
                    out.append(f'<polygon points="{top} {bot}" fill="{color}" fill-opacity="0.15" '
                               f'stroke="{color}" stroke-width="1"/>')
            else:
                ok = np.isfinite(a) & np.isfinite(self._ty(a))
                if ok.any():
                    pts = " ".join(f"{_fmt(px(u))},{_fmt(py(v))}" for u, v in zip(x[ok], a[ok]))
                    dash = ' stroke-dasharray="6 4"' if dashed else ""
                    out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            ly = MARGIN["top"] + 12 + 18 * i
            lx = WIDTH - MARGIN["right"] + 10
            out.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="10" fill="{color}"/>')
            out.append(f'<text x="{lx + 20}" y="{ly}">{escape(label)}</text>')
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="15" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {MARGIN["top"] + ph / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="18" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
