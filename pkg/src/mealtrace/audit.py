"""Data-completeness accounting per participant over a study window."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import InvalidConfig
from .timeseries import ParticipantSeries

DEFAULT_PERIOD = timedelta(seconds=300)
DEFAULT_THRESHOLD = 50.0
_EPOCH_DATE = date(1970, 1, 1)


@dataclass(frozen=True)
class StudyWindow:
    """Half-open interval ``[start, end)``."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        for ts in (self.start, self.end):
            if ts.utcoffset() is None:
                raise InvalidConfig("study window bounds need a UTC offset")
        if not self.start < self.end:
            raise InvalidConfig("study window start must precede end")

    def contains(self, ts: datetime) -> bool:
        return self.start <= ts < self.end


@dataclass(frozen=True)
class CompletenessReport:
    participant_id: str
    collected: int
    expected: int
    percentage: float
    included: bool
    daily_counts: dict[date, int]


def expected_samples(window: StudyWindow | tuple[datetime, datetime], period: timedelta = DEFAULT_PERIOD) -> int:
    """Whole sampling periods that fit in the window.

    Also takes a bare ``(start, end)`` pair, for which an empty or inverted
    interval yields 0.
    """
    if period <= timedelta(0):
        raise InvalidConfig("sampling period must be positive")
    start, end = (window.start, window.end) if isinstance(window, StudyWindow) else window
    return max((end - start) // period, 0)


def round_pct(collected: int, expected: int) -> float:
    """100*collected/expected, rounded half-up to one decimal."""
    if expected <= 0:
        return 0.0
    pct = Decimal(100 * collected) / Decimal(expected)
    return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _local_tz(series: ParticipantSeries, window: StudyWindow) -> timezone:
    return series.offset or timezone(window.start.utcoffset())


def daily_counts(series: ParticipantSeries, window: StudyWindow) -> dict[date, int]:
    """In-window sample counts per local calendar date, zero-filled across the window."""
    tz = _local_tz(series, window)
    first = window.start.astimezone(tz).date()
    last = (window.end - timedelta(seconds=1)).astimezone(tz).date()
    n_days = (last - first).days + 1
    secs = series.epoch_seconds
    inside = secs[(secs >= window.start.timestamp()) & (secs < window.end.timestamp())]
    # fixed offsets only, so local day number is plain integer arithmetic
    shift = int(tz.utcoffset(None).total_seconds())
    day_idx = (inside + shift) // 86400 - (first - _EPOCH_DATE).days
    counts = np.bincount(day_idx, minlength=n_days) if len(day_idx) else np.zeros(n_days, dtype=int)
    return {first + timedelta(days=i): int(c) for i, c in enumerate(counts)}


def completeness(
    series: ParticipantSeries,
    window: StudyWindow,
    period: timedelta = DEFAULT_PERIOD,
    threshold_pct: float = DEFAULT_THRESHOLD,
) -> CompletenessReport:
    daily = daily_counts(series, window)
    collected = sum(daily.values())
    expected = expected_samples(window, period)
    pct = round_pct(collected, expected)
    return CompletenessReport(
        participant_id=series.participant_id,
        collected=collected,
        expected=expected,
        percentage=pct,
        included=pct > threshold_pct,
        daily_counts=daily,
    )
