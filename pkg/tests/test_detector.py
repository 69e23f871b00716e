from datetime import datetime, time, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EDT, T0, at, series_from
from mealtrace.detector import (
    ABOVE,
    BELOW,
    DetectorConfig,
    IqrFences,
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
from mealtrace.errors import EmptyInput, InsufficientData, InvalidConfig, NoCandidates
from mealtrace.synthgen import MealSpec, SynthProfile, generate
from mealtrace.timeseries import GlucoseSample, build_series, segment_contiguous
from oracles import enumerate_windows, naive_std, quantile_bruteforce


def std_of(values, minutes=None, w=3):
    s = series_from(values, minutes)
    return sliding_std(s, segment_contiguous(s), DetectorConfig(window_len=w))


def outlier(minute, sigma=1.0, side=ABOVE, delta=1.0):
    return OutlierPoint(at(minute), sigma, side, delta)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"window_len": 1}, {"window_len": 2.5}, {"iqr_factor": 0}, {"merge_gap": timedelta(minutes=-1)}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            DetectorConfig(**kwargs)


class TestSlidingStd:
    def test_constant(self):
        assert [p.sigma for p in std_of([6, 6, 6, 6])] == [0.0, 0.0]

    def test_three_values(self):
        expected = naive_std([5.0, 7.0, 9.0])
        assert expected == pytest.approx(1.632993, abs=1e-6)
        (p,) = std_of([5, 7, 9])
        assert p.sigma == pytest.approx(expected, abs=1e-12)
        assert p.glucose_delta == 4.0
        assert p.anchor_timestamp == T0

    def test_windows_respect_gaps(self):
        minutes = [0, 5, 10, 20, 25, 30]
        values = [6.0, 7.0, 8.0, 6.5, 6.0, 7.5]
        oracle = enumerate_windows([m * 60 for m in minutes], values, 3, 450)
        assert len(oracle) == 2
        pts = std_of(values, minutes)
        assert [p.anchor_timestamp for p in pts] == [at(0), at(20)]
        for p, (_, sigma, delta) in zip(pts, oracle):
            assert p.sigma == pytest.approx(sigma, abs=1e-12)
            assert p.glucose_delta == pytest.approx(delta, abs=1e-12)

    def test_short_segments_contribute_nothing(self):
        assert std_of([6.0, 7.0], [0, 5]) == []

    def test_equal_values_give_exact_zero(self):
        # 0.1 + 0.1 + 0.1 != 0.3 in binary; centring keeps sigma exactly 0
        assert [p.sigma for p in std_of([0.1, 0.1, 0.1, 7.3, 7.3, 7.3])][0] == 0.0
        assert std_of([7.3] * 5)[-1].sigma == 0.0

    @pytest.mark.parametrize("w", [2, 4, 6])
    def test_other_window_lengths(self, w):
        rng = np.random.default_rng(w)
        values = list(6 + rng.normal(size=40))
        pts = std_of(values, w=w)
        oracle = enumerate_windows([i * 300 for i in range(40)], values, w, 450)
        assert len(pts) == len(oracle) == 40 - w + 1
        assert max(abs(p.sigma - o[1]) for p, o in zip(pts, oracle)) <= 1e-12


class TestIqrFences:
    def test_four_values(self):
        values = [1, 2, 3, 4]
        q1, q3 = quantile_bruteforce(values, 0.25), quantile_bruteforce(values, 0.75)
        assert (q1, q3) == (1.75, 3.25)
        f = iqr_fences(values, 1.5)
        assert (f.q1, f.q3, f.iqr, f.lower_fence, f.upper_fence) == (1.75, 3.25, 1.5, -0.5, 5.5)

    def test_degenerate(self):
        f = iqr_fences([2, 2, 2, 2])
        assert (f.q1, f.q3, f.iqr, f.lower_fence, f.upper_fence) == (2, 2, 0, 2, 2)

    def test_heavy_ties(self):
        values = [0, 0, 0, 0, 0, 0, 0, 10]
        assert quantile_bruteforce(values, 0.25) == 0 and quantile_bruteforce(values, 0.75) == 0
        f = iqr_fences(values)
        assert f.upper_fence == 0.0
        pts = [StdPoint(at(5 * i), float(v), 1.0) for i, v in enumerate(values)]
        assert [o.sigma for o in detect_outliers(pts, f)] == [10.0]

    def test_single_value(self):
        f = iqr_fences([0.7])
        assert f.q1 == f.q3 == 0.7 and f.iqr == 0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            iqr_fences([])

    def test_factor(self):
        f = iqr_fences([1, 2, 3, 4], 3.0)
        assert (f.lower_fence, f.upper_fence) == (1.75 - 4.5, 3.25 + 4.5)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=200), st.floats(0.1, 3.0))
def test_fence_invariants(values, factor):
    f = iqr_fences(values, factor)
    assert f.q1 <= f.q3
    assert f.iqr == f.q3 - f.q1
    assert f.lower_fence == f.q1 - factor * f.iqr
    assert f.upper_fence == f.q3 + factor * f.iqr


class TestDetectOutliers:
    fences = IqrFences(0.1, 0.2, 0.1, -0.05, 0.4)

    def test_all_inside(self):
        pts = [StdPoint(at(5 * i), s, 1.0) for i, s in enumerate([0.1, 0.2, 0.3])]
        assert detect_outliers(pts, self.fences) == []

    def test_above(self):
        pts = [StdPoint(at(5 * i), s, 1.0) for i, s in enumerate([0.1, 0.1, 2.0])]
        (o,) = detect_outliers(pts, self.fences)
        assert o.side == ABOVE and o.sigma == 2.0 and o.anchor_timestamp == at(10)

    def test_below(self):
        fences = IqrFences(1.0, 1.2, 0.2, 0.7, 1.5)
        pts = [StdPoint(at(0), 1.1, 1.0), StdPoint(at(5), 0.0, 0.0), StdPoint(at(10), 1.0, 1.0)]
        (o,) = detect_outliers(pts, fences)
        assert o.side == BELOW and o.sigma == 0.0

    def test_fence_value_is_not_outlier(self):
        pts = [StdPoint(at(0), 0.4, 1.0), StdPoint(at(5), -0.05, 1.0)]
        assert detect_outliers(pts, self.fences) == []


class TestMealCandidates:
    def test_falling_edge_excluded(self):
        assert meal_candidates([outlier(0, delta=-3)]) == []

    def test_rising_edge_kept(self):
        o = outlier(0, delta=3)
        assert meal_candidates([o]) == [o]

    def test_below_excluded(self):
        assert meal_candidates([outlier(0, side=BELOW, delta=3), outlier(5, side=BELOW, delta=-3)]) == []

    def test_zero_delta_excluded(self):
        assert meal_candidates([outlier(0, delta=0.0)]) == []

    def test_filter_off_keeps_all_above(self):
        cfg = DetectorConfig(require_positive_delta=False)
        outs = [outlier(0, delta=-3), outlier(5, delta=3), outlier(10, side=BELOW)]
        assert meal_candidates(outs, cfg) == outs[:2]


class TestGroupMealEvents:
    def test_one_event(self):
        (ev,) = group_meal_events([outlier(0, delta=1), outlier(5, delta=2.5), outlier(10, delta=2)])
        assert (ev.start, ev.end, ev.outlier_count, ev.max_delta) == (at(0), at(10), 3, 2.5)

    def test_two_events(self):
        assert len(group_meal_events([outlier(0), outlier(60)])) == 2

    def test_empty(self):
        assert group_meal_events([]) == []

    def test_gap_boundary(self):
        assert len(group_meal_events([outlier(0), outlier(30)])) == 1
        assert len(group_meal_events([outlier(0), outlier(31)])) == 2


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 3000), max_size=80, unique=True).map(sorted),
    st.integers(0, 90),
)
def test_event_partition(minutes, gap):
    cfg = DetectorConfig(merge_gap=timedelta(minutes=gap))
    cands = [outlier(m) for m in minutes]
    events = group_meal_events(cands, cfg)
    assert sum(e.outlier_count for e in events) == len(cands)
    members = iter(cands)
    for ev in events:
        group = [next(members) for _ in range(ev.outlier_count)]
        assert group[0].anchor_timestamp == ev.start and group[-1].anchor_timestamp == ev.end
        for a, b in zip(group, group[1:]):
            assert b.anchor_timestamp - a.anchor_timestamp <= cfg.merge_gap
    for a, b in zip(events, events[1:]):
        assert b.start - a.end > cfg.merge_gap


class TestMealtimeRoutine:
    def test_counts(self):
        cands = [
            OutlierPoint(T0.replace(hour=8, minute=10), 1, ABOVE, 1),
            OutlierPoint(T0.replace(hour=8, minute=40), 1, ABOVE, 1),
            OutlierPoint(T0.replace(hour=17, minute=5), 1, ABOVE, 1),
        ]
        r = mealtime_routine(cands)
        assert r.counts[8] == 2 and r.counts[17] == 1 and sum(r.counts) == 3
        assert r.probabilities[8] == 2 / 3 and r.probabilities[17] == 1 / 3

    def test_local_hour_uses_offset(self):
        # 12:30 UTC is 08:30 at -04:00; the local hour is binned
        ts = datetime(2022, 6, 10, 12, 30, tzinfo=timezone.utc).astimezone(EDT)
        assert mealtime_routine([OutlierPoint(ts, 1, ABOVE, 1)]).counts[8] == 1

    def test_empty(self):
        with pytest.raises(NoCandidates):
            mealtime_routine([])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 14 * 24 * 60 - 1), min_size=1, max_size=300))
def test_routine_normalized(minutes):
    r = mealtime_routine([outlier(m) for m in minutes])
    assert abs(sum(r.probabilities) - 1.0) <= 1e-9
    assert all(0.0 <= p <= 1.0 for p in r.probabilities)
    assert sum(r.counts) == len(minutes)


class TestAnalyze:
    def test_constant_series_has_no_candidates(self):
        s = series_from([6.0] * (288 * 10))
        with pytest.raises(NoCandidates):
            analyze(s)

    def test_constant_series_fences_are_zero(self):
        s = series_from([6.0] * 50)
        pts = sliding_std(s, segment_contiguous(s))
        f = iqr_fences([p.sigma for p in pts])
        assert all(p.sigma == 0 for p in pts)
        assert (f.iqr, f.lower_fence, f.upper_fence) == (0, 0, 0)

    def test_two_samples(self):
        with pytest.raises(InsufficientData):
            analyze(series_from([6.0, 6.1]))

    def test_gappy_series_without_full_window(self):
        with pytest.raises(InsufficientData):
            analyze(series_from([6.0, 6.1, 6.2, 6.3], [0, 5, 60, 65]))

    def test_single_meal_day(self):
        profile = SynthProfile(baseline=6.0, meals=(MealSpec(time(8, 0), 5.0),), offset=EDT, days=1)
        result = generate(profile)
        a = analyze(result.series)
        (onset,) = result.truth
        (ev,) = a.events
        assert abs(ev.start - onset) <= timedelta(minutes=15)

    def test_composition_order(self):
        result = generate(SynthProfile(baseline=6.0, meals=(MealSpec(time(8), 4.0), MealSpec(time(18), 4.0)), noise_sd=0.1, days=3, seed=3, offset=EDT))
        a = analyze(result.series)
        assert list(a.outliers) == detect_outliers(a.std_points, a.fences)
        assert list(a.candidates) == meal_candidates(a.outliers, a.config)
        assert list(a.events) == group_meal_events(a.candidates, a.config)
        assert a.routine == mealtime_routine(a.candidates)


def _random_series(rng, n=400, dropout=0.05):
    values = 6.0 + np.cumsum(rng.normal(0, 0.3, n))
    values = np.abs(values) + 2.0
    keep = rng.random(n) >= dropout
    return build_series(
        "r", [GlucoseSample(at(5 * i), float(v)) for i, (v, k) in enumerate(zip(values, keep)) if k]
    )


def _shift(series, c=0.0, k=1.0):
    return build_series(series.participant_id, [GlucoseSample(s.timestamp, s.value * k + c) for s in series.samples])


def _pipeline(series):
    segs = segment_contiguous(series)
    pts = sliding_std(series, segs)
    f = iqr_fences([p.sigma for p in pts])
    outs = detect_outliers(pts, f)
    return pts, f, outs, meal_candidates(outs)


@pytest.mark.parametrize("seed", range(10))
def test_shift_invariance(seed):
    rng = np.random.default_rng(seed)
    s = _random_series(rng)
    c = float(rng.uniform(0.5, 20))
    pts, f, outs, cands = _pipeline(s)
    pts2, f2, outs2, cands2 = _pipeline(_shift(s, c=c))
    assert [o.anchor_timestamp for o in cands] == [o.anchor_timestamp for o in cands2]
    assert [(o.anchor_timestamp, o.side) for o in outs] == [(o.anchor_timestamp, o.side) for o in outs2]
    np.testing.assert_allclose([p.sigma for p in pts2], [p.sigma for p in pts], rtol=0, atol=1e-9)
    assert f2.q3 == pytest.approx(f.q3, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_scale_covariance(seed):
    rng = np.random.default_rng(100 + seed)
    s = _random_series(rng)
    k = float(rng.uniform(0.2, 5))
    pts, f, outs, cands = _pipeline(s)
    pts2, f2, outs2, cands2 = _pipeline(_shift(s, k=k))
    np.testing.assert_allclose([p.sigma for p in pts2], [k * p.sigma for p in pts], rtol=1e-9, atol=0)
    for a, b in zip((f.q1, f.q3, f.iqr, f.lower_fence, f.upper_fence), (f2.q1, f2.q3, f2.iqr, f2.lower_fence, f2.upper_fence)):
        assert b == pytest.approx(k * a, rel=1e-9)
    assert [o.anchor_timestamp for o in cands] == [o.anchor_timestamp for o in cands2]
