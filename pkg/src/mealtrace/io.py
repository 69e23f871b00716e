"""CSV and JSON-lines readers/writers for glucose samples.

CSV header: ``participant_id,timestamp,glucose_mmol_l``. JSON-lines carries the
same three keys per object. Values are written with ``repr`` so a write/read
cycle is bit-exact.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, TextIO

from .errors import ParseError
from .timeseries import GlucoseSample, ParticipantSeries, build_series, format_timestamp, parse_timestamp

FIELDS = ("participant_id", "timestamp", "glucose_mmol_l")


class Record(NamedTuple):
    participant_id: str
    sample: GlucoseSample
    line: int


def _make_record(pid, ts, value, *, source: str | None, line: int) -> Record:
    try:
        if not isinstance(pid, str) or not pid.strip():
            raise ParseError("participant_id is empty")
        if not isinstance(ts, str):
            raise ParseError("timestamp must be a string")
        if isinstance(value, bool) or value is None:
            raise ParseError(f"glucose_mmol_l {value!r} is not a number")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ParseError(f"glucose_mmol_l {value!r} is not a number") from None
        sample = GlucoseSample(parse_timestamp(ts), value)
    except ParseError as exc:
        # re-raise with file/line context, keeping the subclass (e.g. NonPositiveValue)
        raise type(exc)(str(exc), source=source, line=line) from None
    return Record(pid.strip(), sample, line)


def iter_csv(stream: TextIO, source: str | None = None) -> Iterator[Record]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return
    header = [h.strip().lstrip("﻿") for h in header]
    if tuple(header) != FIELDS:
        raise ParseError(f"expected header {','.join(FIELDS)}, got {','.join(header)}", source=source, line=1)
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", source=source, line=line)
        yield _make_record(row[0], row[1], row[2].strip(), source=source, line=line)


def iter_jsonl(stream: TextIO, source: str | None = None) -> Iterator[Record]:
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", source=source, line=line_no) from None
        if not isinstance(obj, dict) or any(k not in obj for k in FIELDS):
            raise ParseError(f"object must have keys {', '.join(FIELDS)}", source=source, line=line_no)
        yield _make_record(
            obj["participant_id"], obj["timestamp"], obj["glucose_mmol_l"], source=source, line=line_no
        )


def read_records(path: str | Path) -> list[Record]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        if path.suffix.lower() in (".jsonl", ".ndjson"):
            return list(iter_jsonl(fh, str(path)))
        return list(iter_csv(fh, str(path)))


def group_records(records: Iterable[Record]) -> dict[str, list[GlucoseSample]]:
    grouped: dict[str, list[GlucoseSample]] = defaultdict(list)
    for rec in records:
        grouped[rec.participant_id].append(rec.sample)
    return dict(grouped)


def read_series(path: str | Path) -> dict[str, ParticipantSeries]:
    return {pid: build_series(pid, samples) for pid, samples in group_records(read_records(path)).items()}


def sample_to_json(participant_id: str, sample: GlucoseSample) -> str:
    return json.dumps(
        {
            "participant_id": participant_id,
            "timestamp": format_timestamp(sample.timestamp),
            "glucose_mmol_l": sample.value,
        }
    )


def write_jsonl(series: ParticipantSeries, stream: TextIO) -> None:
    for s in series.samples:
        stream.write(sample_to_json(series.participant_id, s) + "\n")


def write_csv(series_list: Iterable[ParticipantSeries], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FIELDS)
    for series in series_list:
        for s in series.samples:
            writer.writerow([series.participant_id, format_timestamp(s.timestamp), repr(s.value)])


def series_to_csv(series_list: Iterable[ParticipantSeries]) -> str:
    buf = io.StringIO()
    write_csv(series_list, buf)
    return buf.getvalue()
