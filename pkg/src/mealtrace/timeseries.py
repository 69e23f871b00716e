"""Participant glucose timeseries: validated samples, ordering, gap segmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import ConflictingDuplicate, InvalidConfig, MixedOffsets, NonPositiveValue, ParseError

PLAUSIBLE_RANGE = (2.0, 30.0)  # mmol/L; outside is flagged, never rejected


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC3339 timestamp that must carry an explicit UTC offset."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ParseError(f"invalid RFC3339 timestamp {text!r}") from exc
    if ts.tzinfo is None or ts.utcoffset() is None:
        raise ParseError(f"timestamp {text!r} has no UTC offset")
    if ts.microsecond:
        raise ParseError(f"timestamp {text!r} has sub-second precision")
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.isoformat(timespec="seconds")


@dataclass(frozen=True)
class GlucoseSample:
    timestamp: datetime
    value: float

    def __post_init__(self) -> None:
        ts = self.timestamp
        if not isinstance(ts, datetime) or ts.utcoffset() is None:
            raise ParseError("sample timestamp must be a datetime with a UTC offset")
        if ts.microsecond:
            raise ParseError(f"timestamp {ts.isoformat()} has sub-second precision")
        try:
            value = float(self.value)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"glucose value {self.value!r} is not a number") from exc
        if not math.isfinite(value):
            raise ParseError(f"glucose value {self.value!r} is not finite")
        if value <= 0:
            raise NonPositiveValue(f"glucose value {value!r} must be > 0 mmol/L")
        object.__setattr__(self, "value", value)

    @property
    def implausible(self) -> bool:
        lo, hi = PLAUSIBLE_RANGE
        return not lo <= self.value <= hi


@dataclass(frozen=True)
class ParticipantSeries:
    """Strictly ascending, single-offset glucose samples for one participant."""

    participant_id: str
    samples: tuple[GlucoseSample, ...] = ()
    # numeric views, built once at construction so analyses and audits start from arrays
    values: np.ndarray = field(init=False, repr=False, compare=False)
    epoch_seconds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.participant_id, str) or not self.participant_id:
            raise ParseError("participant_id must be a non-empty string")
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "values", np.array([s.value for s in samples], dtype=float))
        if not samples:
            object.__setattr__(self, "epoch_seconds", np.empty(0, dtype=np.int64))
            return
        offset = samples[0].timestamp.utcoffset()
        for cur in samples:
            if cur.timestamp.utcoffset() != offset:
                raise MixedOffsets(
                    f"{self.participant_id}: offset {cur.timestamp.utcoffset()} "
                    f"differs from {offset}"
                )
        secs = np.array([int(s.timestamp.timestamp()) for s in samples], dtype=np.int64)
        bad = np.flatnonzero(np.diff(secs) <= 0)
        if len(bad):
            raise ParseError(
                f"{self.participant_id}: samples not strictly ascending at "
                f"{format_timestamp(samples[bad[0] + 1].timestamp)}"
            )
        object.__setattr__(self, "epoch_seconds", secs)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def offset(self) -> timezone | None:
        if not self.samples:
            return None
        return timezone(self.samples[0].timestamp.utcoffset())

    @property
    def implausible_count(self) -> int:
        return sum(s.implausible for s in self.samples)


@dataclass(frozen=True)
class SamplingSpec:
    nominal_period: timedelta = timedelta(seconds=300)
    contiguity_tolerance: timedelta = timedelta(seconds=450)

    def __post_init__(self) -> None:
        if not timedelta(0) < self.nominal_period <= self.contiguity_tolerance:
            raise InvalidConfig(
                "sampling spec requires 0 < nominal_period <= contiguity_tolerance"
            )


@dataclass(frozen=True)
class Segment:
    start_index: int
    end_index: int  # inclusive

    def __len__(self) -> int:
        return self.end_index - self.start_index + 1


def build_series(participant_id: str, raw_samples: Iterable[GlucoseSample]) -> ParticipantSeries:
    """Sort samples, collapse exact duplicates, and validate.

    Raises ConflictingDuplicate when one timestamp carries two different
    values, and MixedOffsets when samples disagree on their UTC offset.
    """
    if not participant_id:
        raise ParseError("participant_id must be a non-empty string")
    by_instant: dict[datetime, GlucoseSample] = {}
    offset = None
    for sample in raw_samples:
        off = sample.timestamp.utcoffset()
        if offset is None:
            offset = off
        elif off != offset:
            raise MixedOffsets(f"{participant_id}: offsets {offset} and {off} in one series")
        seen = by_instant.get(sample.timestamp)
        if seen is None:
            by_instant[sample.timestamp] = sample
        elif seen.value != sample.value:
            raise ConflictingDuplicate(sample.timestamp, seen.value, sample.value)
    ordered = sorted(by_instant.values(), key=lambda s: s.timestamp)
    return ParticipantSeries(participant_id, tuple(ordered))


def segment_contiguous(series: ParticipantSeries, spec: SamplingSpec = SamplingSpec()) -> list[Segment]:
    """Split a series into maximal runs whose adjacent spacing stays within tolerance."""
    n = len(series)
    if n == 0:
        return []
    tol = spec.contiguity_tolerance.total_seconds()
    gaps = np.diff(series.epoch_seconds) > tol
    breaks = np.flatnonzero(gaps)
    starts = [0, *(int(b) + 1 for b in breaks)]
    ends = [*(int(b) for b in breaks), n - 1]
    return [Segment(s, e) for s, e in zip(starts, ends)]


def samples_from_pairs(
    pairs: Sequence[tuple[datetime, float]],
) -> list[GlucoseSample]:
    return [GlucoseSample(ts, v) for ts, v in pairs]
