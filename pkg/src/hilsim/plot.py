"""Self-contained SVG of a run: response panel over control-action panel."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .executor import TraceFormatError, read_trace_csv

WIDTH, PANEL_H, MARGIN = 800, 260, 56
COLORS = {"r": "#888888", "y": "#1f77b4", "u_cmd": "#d62728", "u_act": "#2ca02c"}


def _panel(x0, y0, w, h, t, series, ylabel, markers=()):
    tmin, tmax = t[0], t[-1]
    allv = [v for _, vals, _ in series for v in vals]
    vmin, vmax = min(allv), max(allv)
    if vmax - vmin < 1e-9:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    span_t = (tmax - tmin) or 1.0

    def px(ti):
        return x0 + (ti - tmin) / span_t * w

    def py(v):
        return y0 + h - (v - vmin) / (vmax - vmin) * h

    out = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>',
        f'<text x="{x0 - 8}" y="{y0 + 12}" text-anchor="end" font-size="11">{vmax:.3g}</text>',
        f'<text x="{x0 - 8}" y="{y0 + h}" text-anchor="end" font-size="11">{vmin:.3g}</text>',
        f'<text x="{x0 - 44}" y="{y0 + h / 2}" font-size="12" transform="rotate(-90 {x0 - 44} {y0 + h / 2})"'
        f' text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for ti in markers:
        out.append(f'<line class="saturation" x1="{px(ti):.2f}" y1="{y0}" x2="{px(ti):.2f}" y2="{y0 + h}" '
                   'stroke="#f5b7b1" stroke-width="1"/>')
    for i, (label, vals, color) in enumerate(series):
        pts = " ".join(f"{px(ti):.2f},{py(v):.2f}" for ti, v in zip(t, vals))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{x0 + w - 8}" y="{y0 + 16 + 14 * i}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{escape(label)}</text>')
    return out


def plot_trace_records(trace, out_svg, title: str = "") -> Path:
    if not trace:
        raise TraceFormatError("empty trace: nothing to plot")
    t = [rec.t_sim_s for rec in trace]
    sat = [rec.t_sim_s for rec in trace if rec.saturated]
    w = WIDTH - 2 * MARGIN
    top = MARGIN
    bottom = top + PANEL_H + MARGIN
    height = bottom + PANEL_H + MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    parts += _panel(MARGIN, top, w, PANEL_H, t,
                    [("r", [x.r_V for x in trace], COLORS["r"]), ("y_read", [x.y_read_V for x in trace], COLORS["y"])],
                    "response [V]")
    parts += _panel(MARGIN, bottom, w, PANEL_H, t,
                    [("u_cmd", [x.u_cmd_V for x in trace], COLORS["u_cmd"]),
                     ("u_actual", [x.u_actual_V for x in trace], COLORS["u_act"])],
                    "control action [V]", markers=sat)
    parts.append(f'<text x="{WIDTH / 2}" y="{height - 14}" text-anchor="middle" font-size="12">time [s]</text>')
    parts.append("</svg>")
    out = Path(out_svg)
    out.write_text("\n".join(parts) + "\n")
    return out


def plot(trace_path, out_svg, title: str | None = None) -> Path:
    """Read a trace CSV and write the SVG; nothing is written on bad input."""
    trace = read_trace_csv(trace_path)
    return plot_trace_records(trace, out_svg, title if title is not None else Path(trace_path).stem)
