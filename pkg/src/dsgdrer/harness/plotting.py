"""Log-scale error curves rendered as a standalone SVG document."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class PlotStyle:
    width: int = 720
    height: int = 440
    margin_left: int = 80
    margin_right: int = 190
    margin_top: int = 30
    margin_bottom: int = 55
    stroke_width: float = 1.8
    title: str = "estimation error"
    x_label: str = "samples per agent"
    y_label: str = "spectral error"


def curve_key(trace) -> str:
    group = trace.meta.get("group", "")
    return f"{group} {trace.algo}".strip()


def collect_curves(traces) -> list:
    """Average agent-mean errors over seeds per (group, algo), in first-seen order."""
    order, members = [], {}
    for t in traces:
        key = curve_key(t)
        if key not in members:
            order.append(key)
            members[key] = []
        members[key].append(t)
    curves = []
    for key in order:
        ts = members[key]
        samples = ts[0].samples
        for t in ts[1:]:
            if not np.array_equal(t.samples, samples):
                raise ValueError(f"curve {key!r}: traces disagree on checkpoints")
        y = np.mean([t.agent_mean() for t in ts], axis=0)
        curves.append((key, np.asarray(samples, dtype=np.float64), y))
    return curves


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> list:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def emit_plot(traces, style: PlotStyle = None) -> str:
    """Render one polyline per (group, algo) curve; byte-identical for equal input."""
    style = style or PlotStyle()
    traces = list(traces)
    if not traces:
        raise ValueError("emit_plot needs at least one trace")
    curves = collect_curves(traces)

    xs = np.concatenate([c[1] for c in curves])
    ys = np.concatenate([c[2] for c in curves])
    pos = ys[ys > 0]
    y_lo = float(pos.min()) if pos.size else 1e-12
    y_hi = float(pos.max()) if pos.size else 1.0
    decades = _decades(y_lo, y_hi)
    if len(decades) < 2:
        decades = [decades[0], decades[0] + 1]
    ly_lo, ly_hi = decades[0], decades[-1]
    x_lo, x_hi = 0.0, float(xs.max()) if xs.max() > 0 else 1.0

    left, top = style.margin_left, style.margin_top
    pw = style.width - style.margin_left - style.margin_right
    ph = style.height - style.margin_top - style.margin_bottom

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        ly = math.log10(max(y, 10.0 ** ly_lo))
        return top + (ly_hi - ly) / (ly_hi - ly_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{style.width}" height="{style.height}" fill="white"/>',
        f'<text x="{_fmt(left + pw / 2)}" y="18" text-anchor="middle" font-size="14">{escape(style.title)}</text>',
    ]
    for dec in decades:
        y = _fmt(py(10.0 ** dec))
        out.append(f'<line class="grid" x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{dec}</text>')
    for i in range(6):
        xv = x_lo + (x_hi - x_lo) * i / 5
        x = _fmt(px(xv))
        out.append(f'<line x1="{x}" y1="{top + ph}" x2="{x}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{top + ph + 18}" text-anchor="middle">{xv:.3g}</text>')
    out.append(f'<rect class="axes" x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{_fmt(left + pw / 2)}" y="{style.height - 12}" text-anchor="middle">'
               f'{escape(style.x_label)}</text>')
    out.append(f'<text x="16" y="{_fmt(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_fmt(top + ph / 2)})">{escape(style.y_label)} (log)</text>')

    for i, (key, x, y) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline class="curve" data-key="{escape(key)}" points="{pts}" fill="none" '
                   f'stroke="{color}" stroke-width="{style.stroke_width}"/>')
        ly = top + 10 + 18 * i
        lx = left + pw + 12
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="{style.stroke_width}"/><text x="{lx + 28}" y="{ly}" '
                   f'dominant-baseline="middle">{escape(key)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
