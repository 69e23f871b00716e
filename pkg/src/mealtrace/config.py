"""Runtime configuration: flags > environment > config file > defaults.

The config file is flat ``key = value`` text (``#`` comments allowed). Keys
mirror the long CLI flags with underscores:

    data_dir, format, addr,
    window_len, iqr_factor, merge_gap (minutes), positive_filter (true/false),
    nominal_period (s), contiguity_tolerance (s),
    start, end (RFC3339), period (s), threshold (percent)
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Mapping

from .audit import StudyWindow
from .detector import DetectorConfig
from .errors import InvalidConfig, ParseError
from .timeseries import SamplingSpec, parse_timestamp

ENV_DATA_DIR = "MEALTRACE_DATA_DIR"
ENV_ADDR = "MEALTRACE_ADDR"

DEFAULTS: dict[str, Any] = {
    "data_dir": "./mealtrace-data",
    "format": "table",
    "addr": "127.0.0.1:8080",
    "window_len": 3,
    "iqr_factor": 1.5,
    "merge_gap": 30.0,
    "positive_filter": True,
    "nominal_period": 300.0,
    "contiguity_tolerance": 450.0,
    "start": None,
    "end": None,
    "period": 300.0,
    "threshold": 50.0,
}
FORMATS = ("table", "csv", "json")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config_file(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config file {path}: {exc.strerror}") from None
    try:
        parser.read_string("[mealtrace]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    values = dict(parser["mealtrace"])
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise InvalidConfig(f"{path}: unknown keys {', '.join(unknown)}")
    return values


def _coerce(key: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise InvalidConfig(f"invalid value for {key}: {raw!r}") from None
    return raw


@dataclass(frozen=True)
class CliConfig:
    data_dir: Path
    sampling: SamplingSpec
    detector: DetectorConfig
    output_format: str = "table"
    addr: str = DEFAULTS["addr"]
    start: datetime | None = None
    end: datetime | None = None
    period: timedelta = timedelta(seconds=300)
    threshold: float = 50.0
    raw: Mapping[str, Any] = field(default_factory=dict, repr=False)

    def window(self) -> StudyWindow | None:
        if self.start is None and self.end is None:
            return None
        if self.start is None or self.end is None:
            raise InvalidConfig("both start and end are needed for a study window")
        return StudyWindow(self.start, self.end)

    def bind_address(self) -> tuple[str, int]:
        host, sep, port = self.addr.rpartition(":")
        if not sep:
            raise InvalidConfig(f"address {self.addr!r} must be HOST:PORT")
        try:
            return host or "127.0.0.1", int(port)
        except ValueError:
            raise InvalidConfig(f"address {self.addr!r} has a non-numeric port") from None


def resolve(
    flags: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
    config_file: str | Path | None = None,
) -> CliConfig:
    """Merge settings by precedence; ``flags`` entries that are None are treated as unset."""
    env = os.environ if env is None else env
    merged: dict[str, Any] = dict(DEFAULTS)
    if config_file is not None:
        merged.update({k: _coerce(k, v) for k, v in read_config_file(config_file).items()})
    if env.get(ENV_DATA_DIR):
        merged["data_dir"] = env[ENV_DATA_DIR]
    if env.get(ENV_ADDR):
        merged["addr"] = env[ENV_ADDR]
    for key, value in (flags or {}).items():
        if value is not None:
            if key not in DEFAULTS:
                raise InvalidConfig(f"unknown setting {key}")
            merged[key] = _coerce(key, value)

    if merged["format"] not in FORMATS:
        raise InvalidConfig(f"format must be one of {', '.join(FORMATS)}")
    try:
        start = parse_timestamp(merged["start"]) if merged["start"] else None
        end = parse_timestamp(merged["end"]) if merged["end"] else None
    except ParseError as exc:
        raise InvalidConfig(f"study window: {exc}") from None
    if merged["threshold"] < 0 or merged["period"] <= 0:
        raise InvalidConfig("threshold must be >= 0 and period > 0")
    return CliConfig(
        data_dir=Path(merged["data_dir"]),
        sampling=SamplingSpec(
            timedelta(seconds=merged["nominal_period"]),
            timedelta(seconds=merged["contiguity_tolerance"]),
        ),
        detector=DetectorConfig(
            window_len=merged["window_len"],
            iqr_factor=merged["iqr_factor"],
            merge_gap=timedelta(minutes=merged["merge_gap"]),
            require_positive_delta=merged["positive_filter"],
        ),
        output_format=merged["format"],
        addr=merged["addr"],
        start=start,
        end=end,
        period=timedelta(seconds=merged["period"]),
        threshold=merged["threshold"],
        raw=merged,
    )
