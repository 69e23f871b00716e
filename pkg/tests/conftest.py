from datetime import datetime, timedelta, timezone

import pytest

from mealtrace.timeseries import GlucoseSample, build_series

EDT = timezone(timedelta(hours=-4))
T0 = datetime(2022, 6, 10, 8, 0, tzinfo=EDT)


def at(minutes, base=T0):
    return base + timedelta(minutes=minutes)


def series_from(values, minutes=None, pid="p1", base=T0):
    if minutes is None:
        minutes = [5 * i for i in range(len(values))]
    return build_series(pid, [GlucoseSample(at(m, base), v) for m, v in zip(minutes, values)])


@pytest.fixture
def store_dir(tmp_path):
    return tmp_path / "store"


STUDY_START = datetime(2022, 6, 9, 12, tzinfo=EDT)
STUDY_END = datetime(2022, 6, 19, 12, tzinfo=EDT)
REFERENCE_COUNTS = {
    "2008": 0,
    "2030": 132,
    "2002": 146,
    "2018": 220,
    "1014": 2425,
    "1026": 2729,
    "4008": 2749,
    "2011": 2760,
}


def reference_store(root):
    """Store whose in-window counts match the reference cohort totals.

    Participant 2008 has only pre-study readings, so it exists on disk yet
    contributes 0 samples to the window.
    """
    from mealtrace.store import SampleLog

    log = SampleLog(root)
    for pid, n in REFERENCE_COUNTS.items():
        if n == 0:
            samples = [GlucoseSample(STUDY_START - timedelta(minutes=5 * (i + 1)), 6.0) for i in range(3)]
        else:
            samples = [GlucoseSample(STUDY_START + timedelta(minutes=5 * i), 6.0 + 0.01 * (i % 7)) for i in range(n)]
        log.append(pid, samples)
    return log


# -- acceptance reporting ------------------------------------------------------
# Tests tagged @pytest.mark.criterion("...") get one PASS/FAIL line in the
# terminal summary.

_CRITERIA: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA.append((marker.args[0], "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _CRITERIA:
        terminalreporter.write_line(f"{status}  {name}")
