"""Static exports of a comparison report: RMSE samples as CSV and a boxplot as SVG."""
from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

import numpy as np

from .datamodel import format_number

CAPTION = "Per-fold held-out RMSE samples (k folds x repetitions per learner)"


def samples_csv_text(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tag", "sample", "rmse"])
    for entry in report["learners"]:
        for i, v in enumerate(entry["rmse_samples"]):
            w.writerow([entry["tag"], i, format_number(float(v))])
    return buf.getvalue()


def read_samples_csv(text: str) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["tag"], []).append(float(row["rmse"]))
    return out


def _box_stats(values):
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    lo, hi = (inside.min(), inside.max()) if inside.size else (q1, q3)
    outliers = v[(v < lo) | (v > hi)]
    return q1, med, q3, lo, hi, outliers


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def boxplot_svg(report: dict, title: str = "RMSE by learner") -> str:
    entries = report["learners"]
    width, height = 120 + 110 * len(entries), 420
    left, right, top, bottom = 70, 20, 40, 60
    all_vals = np.concatenate([np.asarray(e["rmse_samples"], dtype=float) for e in entries])
    vmin, vmax = float(all_vals.min()), float(all_vals.max())
    if vmax == vmin:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad
    plot_h = height - top - bottom
    slot = (width - left - right) / len(entries)

    def y(v):
        return top + plot_h * (1.0 - (v - vmin) / (vmax - vmin))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        f"<desc>{escape(CAPTION)}</desc>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - right}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for tick in np.linspace(vmin, vmax, 6):
        ty = y(tick)
        parts.append(f'<line x1="{left - 5}" y1="{_fmt(ty)}" x2="{left}" y2="{_fmt(ty)}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{_fmt(ty + 4)}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{tick:.3g}</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2:.1f}" transform="rotate(-90 16 {top + plot_h / 2:.1f})" '
                 'text-anchor="middle" font-family="sans-serif" font-size="12">RMSE</text>')
    for i, e in enumerate(entries):
        q1, med, q3, lo, hi, outliers = _box_stats(e["rmse_samples"])
        cx = left + slot * (i + 0.5)
        bw = min(60.0, slot * 0.6)
        x0 = cx - bw / 2
        parts.append(f'<g class="box" data-tag="{escape(e["tag"])}">')
        parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(y(hi))}" x2="{_fmt(cx)}" y2="{_fmt(y(q3))}" stroke="black"/>')
        parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(y(q1))}" x2="{_fmt(cx)}" y2="{_fmt(y(lo))}" stroke="black"/>')
        for w in (lo, hi):
            parts.append(f'<line x1="{_fmt(cx - bw / 4)}" y1="{_fmt(y(w))}" x2="{_fmt(cx + bw / 4)}" '
                         f'y2="{_fmt(y(w))}" stroke="black"/>')
        parts.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y(q3))}" width="{_fmt(bw)}" height="{_fmt(y(q1) - y(q3))}" '
                     'fill="#9ecae1" stroke="black"/>')
        parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y(med))}" x2="{_fmt(x0 + bw)}" y2="{_fmt(y(med))}" '
                     'stroke="black" stroke-width="2"/>')
        for o in outliers:
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(y(o))}" r="3" fill="none" stroke="black"/>')
        parts.append(f'<text x="{_fmt(cx)}" y="{top + plot_h + 20}" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{escape(e["tag"])}</text>')
        parts.append("</g>")
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="10">{escape(CAPTION)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
