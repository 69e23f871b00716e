"""Serialization of analysis and audit results: JSON documents, CSV and text tables.

Field names here are the wire contract shared by the CLI and the HTTP
service; ``docs/schema.md`` describes them. ``dumps`` is the single JSON
encoder both front ends use, so their bytes match.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Iterable, Sequence

from .audit import CompletenessReport, StudyWindow
from .detector import Analysis, MealEvent, OutlierPoint
from .timeseries import format_timestamp

ANALYSIS_SCHEMA = "mealtrace.analysis/1"
AUDIT_SCHEMA = "mealtrace.audit/1"
SUMMARY_FIELDS = ("participant_id", "samples_collected", "expected", "percentage", "included")


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def event_to_dict(ev: MealEvent) -> dict:
    return {
        "start": format_timestamp(ev.start),
        "end": format_timestamp(ev.end),
        "count": ev.outlier_count,
        "max_delta": ev.max_delta,
    }


def _outlier(o: OutlierPoint) -> dict:
    return {
        "timestamp": format_timestamp(o.anchor_timestamp),
        "sigma": o.sigma,
        "side": o.side,
        "delta": o.glucose_delta,
    }


def analysis_to_dict(a: Analysis) -> dict:
    cfg, spec = a.config, a.sampling
    return {
        "schema": ANALYSIS_SCHEMA,
        "participant_id": a.participant_id,
        "config": {
            "window_len": cfg.window_len,
            "iqr_factor": cfg.iqr_factor,
            "merge_gap_min": cfg.merge_gap.total_seconds() / 60,
            "require_positive_delta": cfg.require_positive_delta,
            "nominal_period_s": spec.nominal_period.total_seconds(),
            "contiguity_tolerance_s": spec.contiguity_tolerance.total_seconds(),
        },
        "segment_count": len(a.segments),
        "std_points": [
            {"timestamp": format_timestamp(p.anchor_timestamp), "sigma": p.sigma, "delta": p.glucose_delta}
            for p in a.std_points
        ],
        "fences": {
            "q1": a.fences.q1,
            "q3": a.fences.q3,
            "iqr": a.fences.iqr,
            "lower": a.fences.lower_fence,
            "upper": a.fences.upper_fence,
        },
        "outliers": [_outlier(o) for o in a.outliers],
        "candidates": [_outlier(o) for o in a.candidates],
        "events": [event_to_dict(e) for e in a.events],
        "routine": {
            "counts": list(a.routine.counts),
            "probabilities": list(a.routine.probabilities),
        },
    }


def events_to_list(events: Iterable[MealEvent]) -> list[dict]:
    return [event_to_dict(e) for e in events]


def completeness_to_dict(r: CompletenessReport) -> dict:
    return {
        "participant_id": r.participant_id,
        "samples_collected": r.collected,
        "expected": r.expected,
        "percentage": r.percentage,
        "included": r.included,
        "daily_counts": {d.isoformat(): n for d, n in r.daily_counts.items()},
    }


def sort_reports(reports: Iterable[CompletenessReport]) -> list[CompletenessReport]:
    return sorted(reports, key=lambda r: (r.collected, r.participant_id))


def audit_to_dict(reports: Sequence[CompletenessReport], window: StudyWindow, period_s: float, threshold: float) -> dict:
    return {
        "schema": AUDIT_SCHEMA,
        "window": {"start": format_timestamp(window.start), "end": format_timestamp(window.end)},
        "period_s": period_s,
        "threshold_pct": threshold,
        "participants": [completeness_to_dict(r) for r in sort_reports(reports)],
    }


def _csv(rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _summary_rows(reports: Sequence[CompletenessReport]) -> list[list[Any]]:
    return [
        [r.participant_id, r.collected, r.expected, f"{r.percentage:.1f}", str(r.included).lower()]
        for r in sort_reports(reports)
    ]


def _daily_rows(reports: Sequence[CompletenessReport]) -> tuple[list[str], list[list[Any]]]:
    dates = sorted({d for r in reports for d in r.daily_counts})
    header = ["participant_id", *(d.isoformat() for d in dates)]
    rows = [[r.participant_id, *(r.daily_counts.get(d, 0) for d in dates)] for r in sort_reports(reports)]
    return header, rows


def summary_csv(reports: Sequence[CompletenessReport]) -> str:
    return _csv([SUMMARY_FIELDS, *_summary_rows(reports)])


def daily_csv(reports: Sequence[CompletenessReport]) -> str:
    header, rows = _daily_rows(reports)
    return _csv([header, *rows])


def text_table(header: Sequence[Any], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[str(c) for c in header], *[[str(c) for c in row] for row in rows]]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for n, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def audit_text(reports: Sequence[CompletenessReport]) -> str:
    out = text_table(SUMMARY_FIELDS, _summary_rows(reports))
    if reports:
        header, rows = _daily_rows(reports)
        out += "\n" + text_table([header[0], *(h[5:] for h in header[1:])], rows)
    return out


def analysis_text(a: Analysis) -> str:
    f = a.fences
    lines = [
        f"participant      {a.participant_id}",
        f"segments         {len(a.segments)}",
        f"windows          {len(a.std_points)}",
        f"fences           q1={f.q1:.4f} q3={f.q3:.4f} iqr={f.iqr:.4f} lower={f.lower_fence:.4f} upper={f.upper_fence:.4f}",
        f"outliers         {len(a.outliers)} ({sum(o.side == 'above' for o in a.outliers)} above)",
        f"candidates       {len(a.candidates)}",
        f"events           {len(a.events)}",
        "",
    ]
    rows = [
        [f"{h:02d}:00", a.routine.counts[h], f"{a.routine.probabilities[h]:.3f}"]
        for h in range(24)
    ]
    return "\n".join(lines) + text_table(["hour", "count", "probability"], rows)


def analysis_csv(a: Analysis) -> str:
    rows = [["hour", "count", "probability"]]
    rows += [[h, a.routine.counts[h], repr(a.routine.probabilities[h])] for h in range(24)]
    return _csv(rows)
