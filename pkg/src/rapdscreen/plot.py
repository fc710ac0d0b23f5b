"""SVG results plot: both eyes' diameter traces over the stimulus schedule."""

from __future__ import annotations

from typing import Dict
from xml.sax.saxutils import escape

import numpy as np

from .protocol import Eye, StimulusProtocol

WIDTH, HEIGHT = 900, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 30, 110

EYE_STROKE = {Eye.RIGHT: "#c0392b", Eye.LEFT: "#2166ac"}
LED_FILL = {"R": "#f4a6a6", "G": "#a6e3a6", "B": "#a6c8f4", "W": "#dddddd"}


def _runs(mask: np.ndarray):
    edges = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(np.int8), [0]])))
    return list(zip(edges[::2], edges[1::2]))


def render_report_plot(report: dict, traces: Dict[Eye, object], protocol: StimulusProtocol) -> str:
    """Return a standalone SVG document.

    Draws one polyline per eye (valid filtered samples), a shaded band per
    stimulus labelled with eye and colour, tick marks under interpolated
    spans and a text block with the score and classification.
    """
    t_end = max(protocol.session_end, max(float(tr.timestamps[-1]) for tr in traces.values()))
    d_all = np.concatenate([tr.diameters[tr.valid] for tr in traces.values()])
    d_lo, d_hi = float(d_all.min()), float(d_all.max())
    pad = max(0.5, 0.05 * (d_hi - d_lo))
    d_lo, d_hi = d_lo - pad, d_hi + pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(t):
        return MARGIN_L + plot_w * t / t_end

    def sy(d):
        return MARGIN_T + plot_h * (d_hi - d) / (d_hi - d_lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
           '<g class="stimuli">']
    for i, ev in enumerate(protocol.events):
        x0, x1 = sx(ev.t_on), sx(ev.t_off)
        out.append(f'<rect class="stimulus" x="{x0:.2f}" y="{MARGIN_T}" width="{x1 - x0:.2f}" '
                   f'height="{plot_h}" fill="{LED_FILL[ev.color.value]}" fill-opacity="0.5"/>')
        out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{MARGIN_T - 6}" font-size="11" '
                   f'text-anchor="middle">{ev.eye.value}/{ev.color.value}</text>')
    out.append('</g>')

    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="#333"/>')
    for k in range(6):
        d = d_lo + (d_hi - d_lo) * k / 5
        out.append(f'<text x="{MARGIN_L - 6}" y="{sy(d) + 4:.2f}" font-size="10" '
                   f'text-anchor="end">{d:.1f}</text>')
    for k in range(6):
        t = t_end * k / 5
        out.append(f'<text x="{sx(t):.2f}" y="{MARGIN_T + plot_h + 14}" font-size="10" '
                   f'text-anchor="middle">{t / 1000:.1f} s</text>')
    out.append(f'<text x="14" y="{MARGIN_T + plot_h / 2:.0f}" font-size="11" '
               f'transform="rotate(-90 14 {MARGIN_T + plot_h / 2:.0f})" text-anchor="middle">'
               'pupil diameter (px)</text>')

    for row, eye in enumerate((Eye.RIGHT, Eye.LEFT)):
        tr = traces[eye]
        pts = " ".join(f"{sx(t):.2f},{sy(d):.2f}"
                       for t, d, v in zip(tr.timestamps, tr.diameters, tr.valid) if v)
        out.append(f'<polyline class="trace" data-eye="{eye.value}" points="{pts}" fill="none" '
                   f'stroke="{EYE_STROKE[eye]}" stroke-width="1.5"/>')
        y = MARGIN_T + plot_h + 20 + 5 * row
        for a, b in _runs(np.asarray(tr.interpolated)):
            t0, t1 = tr.timestamps[a], tr.timestamps[b - 1]
            out.append(f'<rect class="interpolated" data-eye="{eye.value}" x="{sx(t0):.2f}" y="{y}" '
                       f'width="{max(sx(t1) - sx(t0), 1.5):.2f}" height="4" fill="{EYE_STROKE[eye]}"/>')

    text_y = HEIGHT - MARGIN_B + 48
    lines = [f"RAPD score {report['score']:+.3f}  classification: {report['classification']}"
             f"  defect side: {report['defect_side']}",
             f"median magnitude right {report['median_right']:.2f}%  left {report['median_left']:.2f}%"
             f"  session {report['session_id']}",
             "right eye: red  left eye: blue  shaded: stimulus (eye/colour)  ticks: interpolated"]
    out.append('<g class="summary" font-size="12">')
    for k, line in enumerate(lines):
        out.append(f'<text x="{MARGIN_L}" y="{text_y + 16 * k}">{escape(line)}</text>')
    out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
