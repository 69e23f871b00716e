"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the HTTP service
puts in its error bodies and the CLI uses to pick an exit status.
"""

from __future__ import annotations


class MealtraceError(Exception):
    code = "error"


class ParseError(MealtraceError, ValueError):
    code = "parse_error"

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NonPositiveValue(ParseError):
    code = "non_positive_value"


class ConflictingDuplicate(MealtraceError, ValueError):
    code = "conflicting_duplicate"

    def __init__(self, timestamp, existing: float, incoming: float):
        self.timestamp = timestamp
        self.existing = existing
        self.incoming = incoming
        super().__init__(
            f"conflicting values at {timestamp.isoformat()}: {existing!r} vs {incoming!r}"
        )


class MixedOffsets(MealtraceError, ValueError):
    code = "mixed_offsets"


class InvalidConfig(MealtraceError, ValueError):
    code = "invalid_config"


class EmptyInput(MealtraceError, ValueError):
    code = "empty_input"


class InsufficientData(MealtraceError):
    code = "insufficient_data"


class NoCandidates(MealtraceError):
    code = "no_candidates"


class InvalidProfile(MealtraceError, ValueError):
    code = "invalid_profile"


class UnknownParticipant(MealtraceError, KeyError):
    code = "unknown_participant"

    def __str__(self) -> str:
        return Exception.__str__(self)


class StorageFailure(MealtraceError, OSError):
    code = "storage_failure"


class BindFailure(MealtraceError, OSError):
    code = "bind_failure"
