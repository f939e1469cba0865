"""Dependency-free SVG rendering of return and cost curves.

Two panels side by side: mean episode return and mean episode cost against
iteration, one polyline per series, and a dashed horizontal line at the
cost limit on the cost panel. Output is a pure function of the input rows.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

from .metrics import read_csv

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
PANEL_W, PANEL_H, PAD = 360, 240, 48


def _fmt(x):
    return f"{x:.2f}"


def series_from_rows(rows, label=""):
    """Aggregate series keyed by ``label/seed``: ``{name: [(iteration, return, cost)]}``.

    Uses the ``agg`` rows when present and otherwise every row.
    """
    agg = [r for r in rows if r["task_id"] == "agg"] or rows
    out = {}
    for r in agg:
        name = f"{label}seed{r['seed']}" if label else f"seed{r['seed']}"
        out.setdefault(name, []).append((r["iteration"], r["mean_episode_return"], r["mean_episode_cost"]))
    return {k: sorted(v) for k, v in sorted(out.items())}


def _panel(x0, title, series, column, ref=None):
    pts = [(p[0], p[column]) for s in series.values() for p in s]
    ys = [y for _, y in pts] + ([ref] if ref is not None else [])
    xs = [x for x, _ in pts]
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0

    def sx(x):
        return x0 + PAD + (x - xlo) / (xhi - xlo) * (PANEL_W - 2 * PAD)

    def sy(y):
        return PANEL_H - PAD + (ylo - y) / (yhi - ylo) * (PANEL_H - 2 * PAD)

    parts = [
        f'<g class="panel" data-title="{escape(title)}">',
        f'<rect x="{x0 + PAD}" y="{PAD}" width="{PANEL_W - 2 * PAD}" height="{PANEL_H - 2 * PAD}" '
        'fill="none" stroke="#000"/>',
        f'<text x="{x0 + PANEL_W / 2}" y="{PAD - 16}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{x0 + PAD}" y="{PANEL_H - PAD + 16}">{_fmt(xlo)}</text>',
        f'<text x="{x0 + PANEL_W - PAD}" y="{PANEL_H - PAD + 16}" text-anchor="end">{_fmt(xhi)}</text>',
        f'<text x="{x0 + PAD - 4}" y="{PANEL_H - PAD}" text-anchor="end">{_fmt(ylo)}</text>',
        f'<text x="{x0 + PAD - 4}" y="{PAD + 10}" text-anchor="end">{_fmt(yhi)}</text>',
    ]
    for k, (name, s) in enumerate(series.items()):
        coords = " ".join(f"{sx(p[0]):.2f},{sy(p[column]):.2f}" for p in s)
        parts.append(f'<polyline class="series" data-name="{escape(name)}" fill="none" '
                     f'stroke="{PALETTE[k % len(PALETTE)]}" points="{coords}"/>')
    if ref is not None:
        parts.append(f'<line class="cost-limit" data-value="{ref!r}" x1="{x0 + PAD}" y1="{sy(ref):.2f}" '
                     f'x2="{x0 + PANEL_W - PAD}" y2="{sy(ref):.2f}" stroke="#000" stroke-dasharray="6,4"/>')
    parts.append("</g>")
    return parts


def render_svg(series: dict, cost_limit=None, title="") -> str:
    width = 2 * PANEL_W
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H + 40}" '
        f'font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        *_panel(0, "mean episode return", series, 1),
        *_panel(PANEL_W, "mean episode cost", series, 2, cost_limit),
    ]
    for k, name in enumerate(series):
        parts.append(f'<text x="{PAD + 90 * k}" y="{PANEL_H + 24}" '
                     f'fill="{PALETTE[k % len(PALETTE)]}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(metrics_csv, out_path, cost_limit=None, title="", label=""):
    """Render ``metrics_csv`` to ``out_path``; a header-only CSV gives empty panels."""
    rows = read_csv(metrics_csv)
    svg = render_svg(series_from_rows(rows, label), cost_limit, title)
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)
    return out_path
