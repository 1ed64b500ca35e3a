"""Minimal SVG line plots (polylines, axes and tick labels, no dependencies)."""

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return list(np.arange(start, hi + 1e-9 * step, step))


def line_plot(series, title="", xlabel="", ylabel="", width=640, height=400):
    """Render ``series`` (list of ``(label, x, y, dashed)``) to an SVG string.

    Non-finite points are dropped.
    """
    m = dict(left=60, right=150, top=30, bottom=45)
    pw, ph = width - m["left"] - m["right"], height - m["top"] - m["bottom"]
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (xs[ok].min(), xs[ok].max()) if ok.any() else (0.0, 1.0)
    y0, y1 = (ys[ok].min(), ys[ok].max()) if ok.any() else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) or 1.0
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return m["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return m["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{m["left"]}" y="{m["top"]}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{m["left"] + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{m["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {m["top"] + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{m["top"] + ph}" x2="{px(t):.1f}" '
                   f'y2="{m["top"] + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.1f}" y="{m["top"] + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{m["left"] - 4}" y1="{py(t):.1f}" x2="{m["left"]}" y2="{py(t):.1f}" stroke="#444"/>')
        out.append(f'<text x="{m["left"] - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    for i, (label, x, y, dashed) in enumerate(series):
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[keep], y[keep]))
        color = COLORS[i % len(COLORS)]
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = m["top"] + 14 + 16 * i
        lx = m["left"] + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}"{dash}/>')
        out.append(f'<text x="{lx + 25}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
