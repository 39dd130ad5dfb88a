"""Dependency-free SVG line plots of measurement sequences."""
import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x):
    return f"{x:.2f}"


def line_plot_svg(series, title="", xlabel="t", width=480, height=300):
    """Render ``series`` (name -> 1-D values over a shared time axis) as SVG text."""
    names = list(series)
    data = [np.asarray(series[n], dtype=float) for n in names]
    n = max(len(d) for d in data)
    left, right, top, bottom = 50, 10, 28, 36
    pw, ph = width - left - right, height - top - bottom
    finite = np.concatenate([d[np.isfinite(d)] for d in data]) if data else np.zeros(1)
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(i):
        return left + pw * (i / max(n - 1, 1))

    def sy(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 6}" text-anchor="middle" font-size="11">{xlabel}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        out.append(f'<text x="{left - 4}" y="{_fmt(sy(v) + 4)}" text-anchor="end" '
                   f'font-size="10">{v:.2g}</text>')
        i = frac * (n - 1)
        out.append(f'<text x="{_fmt(sx(i))}" y="{top + ph + 14}" text-anchor="middle" '
                   f'font-size="10">{int(round(i)) + 1}</text>')
    if lo < 0.0 < hi:
        out.append(f'<line x1="{left}" x2="{left + pw}" y1="{_fmt(sy(0.0))}" y2="{_fmt(sy(0.0))}" '
                   f'stroke="#bbb" stroke-dasharray="3,3"/>')
    for k, (name, d) in enumerate(zip(names, data)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(i))},{_fmt(sy(v))}" for i, v in enumerate(d) if np.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{left + 6 + 40 * k}" y="{top + 12}" font-size="10" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectory_svg(traj, title=""):
    series = {f"y{d + 1}": traj.measurements[:, d] for d in range(traj.D)}
    return line_plot_svg(series, title=title)
