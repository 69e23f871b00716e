"""Seeded synthetic CGM series with a known meal schedule.

Each meal adds a response that rises linearly from 0 to ``rise`` over
``rise_duration`` and then decays exponentially with ``decay_halflife``.
Gaussian noise and dropout come from a single ``numpy.random.Generator``
backed by PCG64 and seeded from the profile; draws happen in a fixed order
(all noise, then all dropout uniforms), so a seed pins the output bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidProfile, ParseError
from .timeseries import GlucoseSample, ParticipantSeries, parse_timestamp


@dataclass(frozen=True)
class MealSpec:
    clock_time: time
    rise: float
    rise_duration: timedelta = timedelta(minutes=30)
    decay_halflife: timedelta = timedelta(minutes=60)

    def __post_init__(self) -> None:
        if not self.rise > 0:
            raise InvalidProfile(f"meal rise must be > 0, got {self.rise!r}")
        if self.rise_duration <= timedelta(0) or self.decay_halflife <= timedelta(0):
            raise InvalidProfile("meal rise_duration and decay_halflife must be > 0")

    def response(self, elapsed_s: np.ndarray) -> np.ndarray:
        """Glucose excursion (mmol/L) at ``elapsed_s`` seconds after onset."""
        rise_s = self.rise_duration.total_seconds()
        half_s = self.decay_halflife.total_seconds()
        t = np.asarray(elapsed_s, dtype=float)
        out = np.zeros_like(t)
        rising = (t >= 0) & (t < rise_s)
        out[rising] = self.rise * t[rising] / rise_s
        decaying = t >= rise_s
        out[decaying] = self.rise * np.exp2(-(t[decaying] - rise_s) / half_s)
        return out


@dataclass(frozen=True)
class Dropout:
    uniform_rate: float = 0.0
    block_gaps: tuple[tuple[datetime, timedelta], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.uniform_rate < 1.0:
            raise InvalidProfile(f"uniform_rate must lie in [0, 1), got {self.uniform_rate!r}")
        for start, dur in self.block_gaps:
            if start.utcoffset() is None or dur < timedelta(0):
                raise InvalidProfile("block gaps need an offset-aware start and non-negative duration")


@dataclass(frozen=True)
class SynthProfile:
    baseline: float
    meals: tuple[MealSpec, ...] = ()
    noise_sd: float = 0.0
    days: int = 1
    period: timedelta = timedelta(seconds=300)
    offset: timezone = timezone.utc
    seed: int = 0
    dropout: Dropout = field(default_factory=Dropout)
    participant_id: str = "synthetic"
    start: datetime | None = None  # default: local midnight 2022-06-09

    def __post_init__(self) -> None:
        if not (math.isfinite(self.baseline) and self.baseline > 0):
            raise InvalidProfile("baseline must be > 0")
        if not (math.isfinite(self.noise_sd) and self.noise_sd >= 0):
            raise InvalidProfile("noise_sd must be >= 0")
        if isinstance(self.days, bool) or not isinstance(self.days, int) or self.days < 1:
            raise InvalidProfile("days must be an integer >= 1")
        if self.period <= timedelta(0) or self.period.microseconds:
            raise InvalidProfile("period must be a positive whole number of seconds")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidProfile("seed must be an unsigned 64-bit integer")
        if not self.participant_id:
            raise InvalidProfile("participant_id must be non-empty")
        if self.start is not None and self.start.utcoffset() != self.offset.utcoffset(None):
            raise InvalidProfile("start must carry the profile offset")

    @property
    def start_instant(self) -> datetime:
        if self.start is not None:
            return self.start
        return datetime(2022, 6, 9, tzinfo=self.offset)

    @property
    def end_instant(self) -> datetime:
        return self.start_instant + timedelta(days=self.days)


@dataclass(frozen=True)
class SynthResult:
    series: ParticipantSeries
    truth: tuple[datetime, ...]


def meal_onsets(profile: SynthProfile) -> list[tuple[datetime, MealSpec]]:
    start, end = profile.start_instant, profile.end_instant
    first_day = start.date()
    onsets = []
    for d in range(profile.days + 1):
        day = first_day + timedelta(days=d)
        for meal in profile.meals:
            onset = datetime.combine(day, meal.clock_time, tzinfo=profile.offset)
            if start <= onset < end:
                onsets.append((onset, meal))
    onsets.sort(key=lambda om: om[0])
    return onsets


def generate(profile: SynthProfile) -> SynthResult:
    start = profile.start_instant
    period_s = int(profile.period.total_seconds())
    n = int((profile.end_instant - start).total_seconds()) // period_s
    offsets_s = np.arange(n, dtype=np.int64) * period_s

    values = np.full(n, float(profile.baseline))
    onsets = meal_onsets(profile)
    for onset, meal in onsets:
        values += meal.response(offsets_s - int((onset - start).total_seconds()))

    rng = np.random.Generator(np.random.PCG64(profile.seed))
    values += rng.normal(0.0, 1.0, n) * profile.noise_sd
    keep = rng.random(n) >= profile.dropout.uniform_rate
    for gap_start, gap_len in profile.dropout.block_gaps:
        lo = (gap_start - start).total_seconds()
        hi = lo + gap_len.total_seconds()
        keep &= ~((offsets_s >= lo) & (offsets_s < hi))

    if np.any(values[keep] <= 0):
        raise InvalidProfile("profile produces non-positive glucose values; raise baseline or lower noise")
    samples = tuple(
        GlucoseSample(start + timedelta(seconds=int(off)), float(v))
        for off, v, k in zip(offsets_s, values, keep)
        if k
    )
    return SynthResult(ParticipantSeries(profile.participant_id, samples), tuple(o for o, _ in onsets))


# -- JSON profile files -------------------------------------------------------

def _parse_offset(text: str) -> timezone:
    text = text.strip()
    if text in ("Z", "z", "UTC"):
        return timezone.utc
    try:
        probe = datetime.fromisoformat(f"2000-01-01T00:00:00{text}")
    except ValueError:
        raise InvalidProfile(f"invalid UTC offset {text!r}") from None
    if probe.tzinfo is None:
        raise InvalidProfile(f"invalid UTC offset {text!r}")
    return timezone(probe.utcoffset())


def _minutes(obj: dict, key: str, default: float | None = None) -> timedelta:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidProfile(f"{key} must be a number of minutes")
    return timedelta(minutes=value)


def profile_from_dict(obj: dict[str, Any]) -> SynthProfile:
    if not isinstance(obj, dict):
        raise InvalidProfile("profile must be a JSON object")
    try:
        offset = _parse_offset(obj.get("offset", "+00:00"))
        meals = []
        for m in obj.get("meals", []):
            meals.append(
                MealSpec(
                    clock_time=time.fromisoformat(m["clock_time"]),
                    rise=float(m["rise"]),
                    rise_duration=_minutes(m, "rise_duration_min", 30),
                    decay_halflife=_minutes(m, "decay_halflife_min", 60),
                )
            )
        drop = obj.get("dropout", {}) or {}
        gaps = tuple(
            (parse_timestamp(g["start"]), _minutes(g, "duration_min"))
            for g in drop.get("block_gaps", [])
        )
        start = obj.get("start")
        return SynthProfile(
            participant_id=str(obj.get("participant_id", "synthetic")),
            baseline=float(obj["baseline"]),
            meals=tuple(meals),
            noise_sd=float(obj.get("noise_sd", 0.0)),
            days=obj.get("days", 1),
            period=timedelta(seconds=obj.get("period_s", 300)),
            offset=offset,
            seed=obj.get("seed", 0),
            dropout=Dropout(float(drop.get("uniform_rate", 0.0)), gaps),
            start=parse_timestamp(start) if start is not None else None,
        )
    except InvalidProfile:
        raise
    except (KeyError, TypeError, ValueError, ParseError) as exc:
        raise InvalidProfile(f"invalid profile: {exc}") from None


def load_profile(path: str | Path) -> SynthProfile:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidProfile(f"{path}: invalid JSON: {exc.msg}") from None
    except OSError as exc:
        raise InvalidProfile(f"{path}: {exc.strerror}") from None
    return profile_from_dict(obj)
