"""Mealtime detection over a participant's glucose series.

Pipeline, in order:

1. population standard deviation over every ``window_len``-sample window that
   fits inside one contiguous segment (windows never bridge a gap);
2. Tukey fences ``Q1 - k*IQR`` / ``Q3 + k*IQR`` over the participant's whole
   sigma vector, quartiles by sorted linear interpolation at ``p*(n-1)``;
3. sigmas strictly outside a fence are outliers;
4. above-fence outliers whose window rose (last minus first > 0) are meal
   candidates, anchored at the window's first sample;
5. candidates within ``merge_gap`` of each other form one meal event;
6. candidates are binned by local hour of day into a 24-bin probability
   histogram (the mealtime routine).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInput, InsufficientData, InvalidConfig, NoCandidates
from .timeseries import ParticipantSeries, SamplingSpec, Segment, segment_contiguous

ABOVE = "above"
BELOW = "below"


@dataclass(frozen=True)
class DetectorConfig:
    window_len: int = 3
    iqr_factor: float = 1.5
    merge_gap: timedelta = timedelta(minutes=30)
    require_positive_delta: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.window_len, bool) or int(self.window_len) != self.window_len or self.window_len < 2:
            raise InvalidConfig(f"window_len must be an integer >= 2, got {self.window_len!r}")
        if not (math.isfinite(self.iqr_factor) and self.iqr_factor > 0):
            raise InvalidConfig(f"iqr_factor must be > 0, got {self.iqr_factor!r}")
        if self.merge_gap < timedelta(0):
            raise InvalidConfig("merge_gap must be >= 0")


@dataclass(frozen=True)
class StdPoint:
    anchor_timestamp: datetime
    sigma: float
    glucose_delta: float


@dataclass(frozen=True)
class IqrFences:
    q1: float
    q3: float
    iqr: float
    lower_fence: float
    upper_fence: float


@dataclass(frozen=True)
class OutlierPoint:
    anchor_timestamp: datetime
    sigma: float
    side: str
    glucose_delta: float


@dataclass(frozen=True)
class MealEvent:
    start: datetime
    end: datetime
    outlier_count: int
    max_delta: float


@dataclass(frozen=True)
class MealtimeRoutine:
    counts: tuple[int, ...]
    probabilities: tuple[float, ...]

    def top_hours(self, k: int = 4) -> list[int]:
        """Hours ordered by descending probability; ties go to the earlier hour."""
        return sorted(range(24), key=lambda h: (-self.counts[h], h))[:k]


@dataclass(frozen=True)
class Analysis:
    participant_id: str
    segments: tuple[Segment, ...]
    std_points: tuple[StdPoint, ...]
    fences: IqrFences
    outliers: tuple[OutlierPoint, ...]
    candidates: tuple[OutlierPoint, ...]
    events: tuple[MealEvent, ...]
    routine: MealtimeRoutine
    config: DetectorConfig = field(default_factory=DetectorConfig)
    sampling: SamplingSpec = field(default_factory=SamplingSpec)


def window_stats(values: np.ndarray, window_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Population sigma and last-minus-first delta for each full window of ``values``.

    Values are re-centred on each window's first sample before the two-pass
    variance, so a window of identical readings gives exactly 0.
    """
    if len(values) < window_len:
        return np.empty(0), np.empty(0)
    win = sliding_window_view(np.asarray(values, dtype=float), window_len)
    centred = win - win[:, :1]
    mean = centred.mean(axis=1)
    var = ((centred - mean[:, None]) ** 2).mean(axis=1)
    return np.sqrt(var), win[:, -1] - win[:, 0]


def sliding_std(
    series: ParticipantSeries,
    segments: Sequence[Segment],
    cfg: DetectorConfig = DetectorConfig(),
) -> list[StdPoint]:
    points: list[StdPoint] = []
    values = series.values
    for seg in segments:
        if len(seg) < cfg.window_len:
            continue
        sigmas, deltas = window_stats(values[seg.start_index : seg.end_index + 1], cfg.window_len)
        for i, (sigma, delta) in enumerate(zip(sigmas.tolist(), deltas.tolist())):
            anchor = series.samples[seg.start_index + i].timestamp
            points.append(StdPoint(anchor, sigma, delta))
    points.sort(key=lambda p: p.anchor_timestamp)
    return points


def linear_quantile(sorted_values: Sequence[float], p: float) -> float:
    """Quantile of pre-sorted data by linear interpolation at position ``p*(n-1)``."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyInput("quantile of empty data")
    pos = p * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    a = float(sorted_values[lo])
    return a + frac * (float(sorted_values[hi]) - a)


def iqr_fences(values: Sequence[float], factor: float = 1.5) -> IqrFences:
    if len(values) == 0:
        raise EmptyInput("cannot compute IQR fences of an empty vector")
    ordered = np.sort(np.asarray(values, dtype=float))
    q1 = linear_quantile(ordered, 0.25)
    q3 = linear_quantile(ordered, 0.75)
    iqr = q3 - q1
    return IqrFences(q1, q3, iqr, q1 - factor * iqr, q3 + factor * iqr)


def detect_outliers(std_points: Sequence[StdPoint], fences: IqrFences) -> list[OutlierPoint]:
    out = []
    for p in std_points:
        if p.sigma > fences.upper_fence:
            out.append(OutlierPoint(p.anchor_timestamp, p.sigma, ABOVE, p.glucose_delta))
        elif p.sigma < fences.lower_fence:
            out.append(OutlierPoint(p.anchor_timestamp, p.sigma, BELOW, p.glucose_delta))
    return out


def meal_candidates(outliers: Sequence[OutlierPoint], cfg: DetectorConfig = DetectorConfig()) -> list[OutlierPoint]:
    return [
        o
        for o in outliers
        if o.side == ABOVE and (not cfg.require_positive_delta or o.glucose_delta > 0)
    ]


def group_meal_events(candidates: Sequence[OutlierPoint], cfg: DetectorConfig = DetectorConfig()) -> list[MealEvent]:
    events: list[MealEvent] = []
    members: list[OutlierPoint] = []

    def close() -> None:
        events.append(
            MealEvent(
                start=members[0].anchor_timestamp,
                end=members[-1].anchor_timestamp,
                outlier_count=len(members),
                max_delta=max(m.glucose_delta for m in members),
            )
        )

    for cand in candidates:
        if members and cand.anchor_timestamp - members[-1].anchor_timestamp > cfg.merge_gap:
            close()
            members = []
        members.append(cand)
    if members:
        close()
    return events


def mealtime_routine(candidates: Sequence[OutlierPoint]) -> MealtimeRoutine:
    if not candidates:
        raise NoCandidates("no meal candidates to build a routine from")
    counts = [0] * 24
    for c in candidates:
        counts[c.anchor_timestamp.hour] += 1
    total = sum(counts)
    return MealtimeRoutine(tuple(counts), tuple(c / total for c in counts))


def analyze(
    series: ParticipantSeries,
    spec: SamplingSpec = SamplingSpec(),
    cfg: DetectorConfig = DetectorConfig(),
) -> Analysis:
    segments = segment_contiguous(series, spec)
    points = sliding_std(series, segments, cfg)
    if not points:
        raise InsufficientData(
            f"{series.participant_id}: no contiguous segment has {cfg.window_len} samples"
        )
    fences = iqr_fences([p.sigma for p in points], cfg.iqr_factor)
    outliers = detect_outliers(points, fences)
    candidates = meal_candidates(outliers, cfg)
    events = group_meal_events(candidates, cfg)
    routine = mealtime_routine(candidates)
    return Analysis(
        participant_id=series.participant_id,
        segments=tuple(segments),
        std_points=tuple(points),
        fences=fences,
        outliers=tuple(outliers),
        candidates=tuple(candidates),
        events=tuple(events),
        routine=routine,
        config=cfg,
        sampling=spec,
    )
