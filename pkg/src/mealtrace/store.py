"""Append-only per-participant sample log.

One JSON-lines file per participant under the root directory, in the same
record format the ingest path reads. A batch is committed by writing the old
file contents plus the new lines to a temporary file, fsyncing it, and
renaming it over the original. Readers therefore always see either the
state before a batch or the state after it, never a torn write, and
existing lines are copied through byte for byte.

Writers for one participant are serialized with ``flock`` on a sidecar lock
file, which also covers separate processes (CLI ingest next to the server).
"""

from __future__ import annotations

import fcntl
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator, Sequence
from urllib.parse import quote, unquote

from .errors import ConflictingDuplicate, ParseError, StorageFailure, UnknownParticipant
from .io import iter_jsonl, sample_to_json
from .timeseries import GlucoseSample, ParticipantSeries, build_series

SUFFIX = ".jsonl"


def _filename(participant_id: str) -> str:
    # percent-encode everything but [A-Za-z0-9_-] so ids can never escape the root
    return quote(participant_id, safe="-_").replace(".", "%2E").replace("~", "%7E") + SUFFIX


@dataclass(frozen=True)
class AppendResult:
    accepted: int
    duplicates: int


class SampleLog:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, participant_id: str) -> Path:
        if not participant_id:
            raise ParseError("participant_id must be non-empty")
        return self.root / _filename(participant_id)

    def participants(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            unquote(p.name[: -len(SUFFIX)]) for p in self.root.glob("*" + SUFFIX) if not p.name.startswith(".")
        )

    def exists(self, participant_id: str) -> bool:
        return self.path_for(participant_id).exists()

    @contextmanager
    def _locked(self, participant_id: str) -> Iterator[None]:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            lock = open(self.path_for(participant_id).with_suffix(".lock"), "a")
        except OSError as exc:
            raise StorageFailure(f"cannot open lock for {participant_id!r}: {exc}") from exc
        try:
            fcntl.flock(lock, fcntl.LOCK_EX)
            yield
        finally:
            lock.close()

    def _read_samples(self, path: Path, participant_id: str) -> list[GlucoseSample]:
        try:
            with path.open(encoding="utf-8") as fh:
                return [rec.sample for rec in iter_jsonl(fh, str(path))]
        except FileNotFoundError:
            raise UnknownParticipant(f"unknown participant {participant_id!r}") from None
        except OSError as exc:
            raise StorageFailure(f"cannot read {path}: {exc}") from exc

    def append(self, participant_id: str, samples: Sequence[GlucoseSample]) -> AppendResult:
        """Store new samples; count exact re-sends; reject the batch on any conflict."""
        path = self.path_for(participant_id)
        with self._locked(participant_id):
            stored: dict[datetime, float] = {}
            if path.exists():
                stored = {s.timestamp: s.value for s in self._read_samples(path, participant_id)}
            fresh: dict[datetime, GlucoseSample] = {}
            duplicates = 0
            for s in samples:
                known = stored.get(s.timestamp)
                if known is None:
                    pending = fresh.get(s.timestamp)
                    if pending is None:
                        fresh[s.timestamp] = s
                        continue
                    known = pending.value
                if known != s.value:
                    raise ConflictingDuplicate(s.timestamp, known, s.value)
                duplicates += 1
            if fresh:
                # offset consistency check before anything touches disk
                build_series(participant_id, [*(GlucoseSample(t, v) for t, v in stored.items()), *fresh.values()])
                lines = "".join(sample_to_json(participant_id, s) + "\n" for s in fresh.values())
                self._commit(path, lines)
            return AppendResult(accepted=len(fresh), duplicates=duplicates)

    def _commit(self, path: Path, new_lines: str) -> None:
        try:
            old = path.read_bytes() if path.exists() else b""
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=SUFFIX)
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(old)
                    fh.write(new_lines.encode("utf-8"))
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            dir_fd = os.open(self.root, os.O_RDONLY)
            try:
                os.fsync(dir_fd)
            finally:
                os.close(dir_fd)
        except OSError as exc:
            raise StorageFailure(f"cannot write {path}: {exc}") from exc

    def load(self, participant_id: str) -> ParticipantSeries:
        path = self.path_for(participant_id)
        return build_series(participant_id, self._read_samples(path, participant_id))


def append_samples(log: SampleLog, participant_id: str, samples: Sequence[GlucoseSample]) -> AppendResult:
    return log.append(participant_id, samples)


def load_series(log: SampleLog, participant_id: str) -> ParticipantSeries:
    return log.load(participant_id)
