"""Static SVG figures for an analysis.

Figures are built on bare ``Figure`` objects (no pyplot state) so they can be
rendered from server threads. Margins are fixed rather than computed by a
layout engine, which keeps rendering cheap. The SVG hash salt is fixed and the date
metadata is dropped, which makes the output byte-stable across runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import numpy as np
from matplotlib.figure import Figure

from .detector import ABOVE, Analysis
from .timeseries import ParticipantSeries

RC = {
    "svg.hashsalt": "mealtrace",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "path.simplify": False,
}
SVG_METADATA = {"Date": None, "Creator": "mealtrace"}

BAR_COLOR = "#4c72b0"
OUTLIER_COLOR = "#c44e52"
LINE_COLOR = "#333333"


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context(RC):
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    return path


def _local_naive(series_or_times, tz):
    return [t.astimezone(tz).replace(tzinfo=None) for t in series_or_times]


def routine_chart(analysis: Analysis) -> Figure:
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(7.5, 3.2))
        ax = fig.add_subplot()
        probs = np.asarray(analysis.routine.probabilities)
        ax.bar(np.arange(24), probs, width=0.8, color=BAR_COLOR)
        ax.set_xticks(np.arange(24))
        ax.set_xticklabels([f"{h:02d}" for h in range(24)])
        ax.set_xlim(-0.6, 23.6)
        ax.set_xlabel("hour of day (local)")
        ax.set_ylabel("probability")
        ax.set_title(f"Estimated mealtime routine: {analysis.participant_id}")
        fig.subplots_adjust(left=0.09, right=0.98, bottom=0.15, top=0.9)
    return fig


def sigma_boxplot(analysis: Analysis) -> Figure:
    sigmas = np.array([p.sigma for p in analysis.std_points])
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(3.2, 4.2))
        ax = fig.add_subplot()
        ax.boxplot(sigmas, whis=analysis.config.iqr_factor, showfliers=False, widths=0.5)
        out = np.array([o.sigma for o in analysis.outliers])
        if out.size:
            ax.scatter(np.ones_like(out), out, s=10, color=OUTLIER_COLOR, zorder=3)
        ax.axhline(analysis.fences.upper_fence, color=OUTLIER_COLOR, lw=0.6, ls="--")
        ax.set_xticks([1])
        ax.set_xticklabels([analysis.participant_id])
        ax.set_ylabel("window standard deviation (mmol/L)")
        ax.set_title("Sliding-window sigma")
        fig.subplots_adjust(left=0.24, right=0.96, bottom=0.07, top=0.93)
    return fig


def timeseries_chart(series: ParticipantSeries, analysis: Analysis) -> Figure:
    tz = series.offset
    times = mdates.date2num(_local_naive((s.timestamp for s in series.samples), tz))
    values = series.values.copy()
    # NaN break at each segment boundary so the line never bridges a gap
    breaks = [seg.start_index for seg in analysis.segments[1:]]
    times = np.insert(times, breaks, np.nan)
    values = np.insert(values, breaks, np.nan)
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(10, 3.6))
        ax = fig.add_subplot()
        ax.plot(times, values, color=LINE_COLOR, lw=0.7)
        anchors = [c.anchor_timestamp for c in analysis.candidates if c.side == ABOVE]
        if anchors:
            ax.vlines(
                mdates.date2num(_local_naive(anchors, tz)),
                0,
                1,
                transform=ax.get_xaxis_transform(),
                color=OUTLIER_COLOR,
                lw=0.5,
                alpha=0.7,
            )
        ax.xaxis.set_major_formatter(mdates.DateFormatter("%d %H:%M"))
        ax.set_xlabel("local time (day hour:minute)")
        ax.set_ylabel("blood glucose (mmol/L)")
        ax.set_title(f"Detected meal onsets: {analysis.participant_id}")
        fig.subplots_adjust(left=0.06, right=0.99, bottom=0.14, top=0.91)
    return fig


def write_figures(series: ParticipantSeries, analysis: Analysis, outdir: str | Path) -> list[Path]:
    """Write the routine, boxplot and timeseries SVGs; return their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = series.participant_id.replace("/", "_")
    return [
        _save(routine_chart(analysis), outdir / f"{stem}_routine.svg"),
        _save(sigma_boxplot(analysis), outdir / f"{stem}_boxplot.svg"),
        _save(timeseries_chart(series, analysis), outdir / f"{stem}_timeseries.svg"),
    ]
