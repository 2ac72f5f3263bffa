"""Bare-bones SVG line charts: polylines on linear axes in an 800 x 500 canvas."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")
MAX_POINTS = 2000


@dataclass
class Panel:
    title: str
    x_label: str
    y_label: str
    box: tuple                                   # (left, top, width, height) in canvas units
    series: list = field(default_factory=list)   # (label, x, y)

    def add(self, label, x, y):
        self.series.append((label, np.asarray(x, dtype=float), np.asarray(y, dtype=float)))


def _thin(x, y):
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


def _range(values):
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        pad = max(abs(hi) * 1e-3, 1e-12)
        return lo - pad, hi + pad
    return lo, hi


def _fmt(v):
    return f"{v:.4g}"


def _render_panel(p: Panel):
    left, top, w, h = p.box
    pad_l, pad_b, pad_t = 58, 30, 18
    x0, y0, pw, ph = left + pad_l, top + pad_t, w - pad_l - 8, h - pad_t - pad_b
    xs = np.concatenate([s[1] for s in p.series]) if p.series else np.zeros(1)
    ys = np.concatenate([s[2] for s in p.series]) if p.series else np.zeros(1)
    xlo, xhi = _range(xs)
    ylo, yhi = _range(ys)

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return y0 + ph - (v - ylo) / (yhi - ylo) * ph

    out = [f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{pw:.1f}" height="{ph:.1f}" '
           'fill="none" stroke="#333" stroke-width="0.8"/>',
           f'<text x="{left + w / 2:.1f}" y="{top + 12:.1f}" text-anchor="middle" '
           f'font-size="12">{escape(p.title)}</text>',
           f'<text x="{x0 + pw / 2:.1f}" y="{y0 + ph + 26:.1f}" text-anchor="middle" '
           f'font-size="10">{escape(p.x_label)}</text>',
           f'<text x="{left + 10:.1f}" y="{y0 + ph / 2:.1f}" text-anchor="middle" font-size="10" '
           f'transform="rotate(-90 {left + 10:.1f} {y0 + ph / 2:.1f})">{escape(p.y_label)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = xlo + frac * (xhi - xlo), ylo + frac * (yhi - ylo)
        out.append(f'<text x="{px(xv):.1f}" y="{y0 + ph + 12:.1f}" text-anchor="middle" '
                   f'font-size="9">{_fmt(xv)}</text>')
        out.append(f'<text x="{x0 - 3:.1f}" y="{py(yv) + 3:.1f}" text-anchor="end" '
                   f'font-size="9">{_fmt(yv)}</text>')
    for k, (label, x, y) in enumerate(p.series):
        color = PALETTE[k % len(PALETTE)]
        x, y = _thin(x, y)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{x0 + pw - 4:.1f}" y="{y0 + 12 + 11 * k:.1f}" text-anchor="end" '
                   f'font-size="9" fill="{color}">{escape(label)}</text>')
    return out


def render(panels) -> str:
    body = []
    for p in panels:
        body.extend(_render_panel(p))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
            f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def estimate_panels(series, y_measured=None):
    """Three panels for an observer run: SOC estimates, flux vs cell SOC, weights."""
    hours = series.t / 3600.0
    soc = Panel("State of charge", "time [h]", "SOC [-]", (0, 0, WIDTH, 250))
    soc.add("reservoir estimate", hours, series.x_hat[:, 0])
    soc.add("cell estimate", hours, series.x_hat[:, 1])
    if y_measured is not None:
        soc.add("cell, from voltage", hours, y_measured)
    flux = Panel("Crossover flux vs cell SOC", "cell SOC estimate [-]", "q_x [mol/s]", (0, 250, WIDTH / 2, 250))
    flux.add("flux estimate", series.s_hat, series.q_x_hat)
    weights = Panel("Basis weights", "time [h]", "weight [mol/s]", (WIDTH / 2, 250, WIDTH / 2, 250))
    for j in range(series.theta_hat.shape[1]):
        weights.add(f"w{j + 1}", hours, series.theta_hat[:, j])
    return [soc, flux, weights]
