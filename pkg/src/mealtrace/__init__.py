"""Mealtime-routine estimation from 5-minute continuous glucose monitor data."""

from .audit import CompletenessReport, StudyWindow, completeness, daily_counts, expected_samples
from .detector import (
    Analysis,
    DetectorConfig,
    IqrFences,
    MealEvent,
    MealtimeRoutine,
    OutlierPoint,
    StdPoint,
    analyze,
    detect_outliers,
    group_meal_events,
    iqr_fences,
    meal_candidates,
    mealtime_routine,
    sliding_std,
)
from .store import SampleLog, append_samples, load_series
from .synthgen import Dropout, MealSpec, SynthProfile, generate
from .timeseries import GlucoseSample, ParticipantSeries, SamplingSpec, Segment, build_series, segment_contiguous

__version__ = "0.1.0"

__all__ = [
    "Analysis",
    "CompletenessReport",
    "DetectorConfig",
    "Dropout",
    "GlucoseSample",
    "IqrFences",
    "MealEvent",
    "MealSpec",
    "MealtimeRoutine",
    "OutlierPoint",
    "ParticipantSeries",
    "SampleLog",
    "SamplingSpec",
    "Segment",
    "StdPoint",
    "StudyWindow",
    "SynthProfile",
    "analyze",
    "append_samples",
    "build_series",
    "completeness",
    "daily_counts",
    "detect_outliers",
    "expected_samples",
    "generate",
    "group_meal_events",
    "iqr_fences",
    "load_series",
    "meal_candidates",
    "mealtime_routine",
    "segment_contiguous",
    "sliding_std",
]
