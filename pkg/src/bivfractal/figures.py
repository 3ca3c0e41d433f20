"""Static SVG panels for experiment summaries.

Written by hand rather than through a plotting library so that the bytes
depend only on the data. Three panels per experiment:

* ``ci``: mean estimate with 95% interval against ``n`` (linear axes), the
  true value drawn as a dashed line;
* ``bias_var``: ``|bias|`` and variance against ``n`` on log-log axes;
* ``cross``: ``|cross covariance|`` against ``n`` on log-log axes with the
  fitted line and its slope in the legend.

Numbers are formatted with fixed precision; no timestamps are written.
"""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .montecarlo import ExperimentSummary, fit_decay_rate

__all__ = ["ci_panel", "bias_variance_panel", "cross_panel", "write_panels"]

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (math.log10(v) if logx else v for v in xlim)
        self.y0, self.y1 = (math.log10(v) if logy else v for v in ylim)

    def px(self, x):
        x = math.log10(x) if self.logx else x
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        y = math.log10(y) if self.logy else y
        return H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _limits(vals, log=False, pad=0.06):
    vals = np.asarray([v for v in vals if np.isfinite(v) and (v > 0 or not log)])
    lo, hi = float(vals.min()), float(vals.max())
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi, lo = hi + 0.5, lo - 0.5
    span = hi - lo
    lo, hi = lo - pad * span, hi + pad * span
    return (10 ** lo, 10 ** hi) if log else (lo, hi)


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        for mant in ((1,), (1, 2, 5), tuple(range(1, 10))):
            ts = [k * 10.0 ** e for e in range(a, b + 1) for k in mant if lo <= k * 10.0 ** e <= hi]
            if len(ts) >= 3:
                return ts
        return ts
    raw = (hi - lo) / 4
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((k * mag for k in (1, 2, 2.5, 5, 10) if k * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def _tick_label(v, log):
    return f"{v:.3g}" if log or abs(v) >= 1e-12 else "0"


def _frame(ax: _Axes, xlim, ylim, title, xlabel, ylabel, xticks=None):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
        f'fill="none" stroke="black"/>',
    ]
    for t in (xticks if xticks is not None else _ticks(*xlim, ax.logx)):
        x = ax.px(t)
        out.append(f'<line x1="{_f(x)}" y1="{H - BOTTOM}" x2="{_f(x)}" y2="{H - BOTTOM + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{H - BOTTOM + 16}" text-anchor="middle">{_tick_label(t, ax.logx)}</text>')
    for t in _ticks(*ylim, ax.logy):
        y = ax.py(t)
        out.append(f'<line x1="{LEFT - 4}" y1="{_f(y)}" x2="{LEFT}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_f(y + 4)}" text-anchor="end">{_tick_label(t, ax.logy)}</text>')
    out.append(f'<text x="{(LEFT + W - RIGHT) / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(TOP + H - BOTTOM) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(TOP + H - BOTTOM) / 2:.1f})">{escape(ylabel)}</text>')
    return out


def _polyline(ax, xs, ys, color, dash=None):
    pts = " ".join(f"{_f(ax.px(x))},{_f(ax.py(y))}" for x, y in zip(xs, ys))
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{d}/>'


def _markers(ax, xs, ys, color):
    return [f'<circle cx="{_f(ax.px(x))}" cy="{_f(ax.py(y))}" r="2.5" fill="{color}"/>'
            for x, y in zip(xs, ys)]


def _legend(entries):
    out = []
    for k, (label, color) in enumerate(entries):
        y = TOP + 14 + 14 * k
        out.append(f'<line x1="{LEFT + 8}" y1="{y - 4}" x2="{LEFT + 24}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + 28}" y="{y}">{escape(label)}</text>')
    return out


def _design_ticks(n):
    # label the design points themselves, thinned to at most nine
    step = max(1, math.ceil(len(n) / 9))
    return [float(v) for v in n[::step]]


def _sym(summary: ExperimentSummary) -> str:
    return "nu" if summary.config.scale == "nu" else "alpha"


def ci_panel(summary: ExperimentSummary) -> str:
    n = summary.n_values.astype(float)
    lo = np.array([s.ci_low for s in summary.per_n])
    hi = np.array([s.ci_high for s in summary.per_n])
    mean = np.array([s.mean for s in summary.per_n])
    truth = summary.config.truth
    xlim = _limits(n)
    ylim = _limits(np.concatenate([lo.ravel(), hi.ravel(), truth]))
    ax = _Axes(xlim, ylim)
    sym = _sym(summary)
    out = _frame(ax, xlim, ylim, "Estimates with 95% intervals", "n", f"{sym} estimate",
                 xticks=_design_ticks(n))
    legend = []
    for k in (0, 1):
        c = COLORS[k]
        out.append(_polyline(ax, xlim, (truth[k], truth[k]), c, dash="4 3"))
        out.append(_polyline(ax, n, mean[:, k], c))
        for x, a, b in zip(n, lo[:, k], hi[:, k]):
            out.append(f'<line x1="{_f(ax.px(x))}" y1="{_f(ax.py(a))}" x2="{_f(ax.px(x))}" '
                       f'y2="{_f(ax.py(b))}" stroke="{c}"/>')
        legend.append((f"{sym}{k + 1}{k + 1} (true {truth[k]:.3g})", c))
    out += _legend(legend)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _loglog_panel(summary, names, labels, title, ylabel, fit_name=None):
    n = summary.n_values.astype(float)
    series = [summary.series(k) for k in names]
    positive = np.concatenate([s[s > 0] for s in series])
    xlim = _limits(n, log=True)
    ylim = _limits(positive, log=True)
    ax = _Axes(xlim, ylim, logx=True, logy=True)
    out = _frame(ax, xlim, ylim, title, "n (log scale)", ylabel, xticks=_design_ticks(n))
    legend = []
    for k, (s, label) in enumerate(zip(series, labels)):
        c = COLORS[k]
        keep = s > 0
        if keep.sum() >= 2:
            out.append(_polyline(ax, n[keep], s[keep], c))
        out += _markers(ax, n[keep], s[keep], c)
        if fit_name is not None and keep.sum() >= 3:
            fit = fit_decay_rate(zip(n, s))
            line = np.exp(fit.intercept) * n ** fit.slope
            out.append(_polyline(ax, n, line, "black", dash="5 3"))
            label = f"{label}, fitted slope {fit.slope:.2f}"
        legend.append((label, c))
    out += _legend(legend)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bias_variance_panel(summary: ExperimentSummary) -> str:
    sym = _sym(summary)
    return _loglog_panel(summary, ("abs_bias_1", "abs_bias_2", "var_1", "var_2"),
                         (f"|bias| {sym}11", f"|bias| {sym}22", f"var {sym}11", f"var {sym}22"),
                         "Absolute bias and variance", "value (log scale)")


def cross_panel(summary: ExperimentSummary) -> str:
    return _loglog_panel(summary, ("abs_cross_cov",), ("|cross cov|",),
                         "Absolute cross covariance", "value (log scale)", fit_name="abs_cross_cov")


def write_panels(summary: ExperimentSummary, out_dir, prefix: str = "") -> list[Path]:
    """Write the three panels; returns the paths in a fixed order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, fn in (("ci", ci_panel), ("bias_var", bias_variance_panel), ("cross", cross_panel)):
        p = out_dir / f"{prefix}{name}.svg"
        p.write_text(fn(summary), encoding="utf-8", newline="\n")
        files.append(p)
    return files
