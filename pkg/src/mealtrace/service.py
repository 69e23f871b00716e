"""HTTP collector and query service over a ``SampleLog``.

Endpoints (JSON in, JSON out):

    POST /v1/participants/{id}/samples
    GET  /v1/participants/{id}/completeness?start=RFC3339&end=RFC3339
    GET  /v1/participants/{id}/routine
    GET  /v1/participants/{id}/events
    GET  /healthz

Every analysis request reloads the participant log and recomputes, so there
is no cache to go stale. Response bodies come from the same serializers the
CLI uses.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urlsplit

from . import report
from .audit import StudyWindow, completeness
from .detector import DetectorConfig, analyze
from .errors import (
    BindFailure,
    ConflictingDuplicate,
    InsufficientData,
    InvalidConfig,
    MealtraceError,
    MixedOffsets,
    NoCandidates,
    ParseError,
    StorageFailure,
    UnknownParticipant,
)
from .store import SampleLog
from .timeseries import GlucoseSample, SamplingSpec, parse_timestamp

log = logging.getLogger(__name__)

MAX_BODY = 16 * 1024 * 1024

STATUS = {
    ParseError: HTTPStatus.BAD_REQUEST,
    InvalidConfig: HTTPStatus.BAD_REQUEST,
    UnknownParticipant: HTTPStatus.NOT_FOUND,
    ConflictingDuplicate: HTTPStatus.CONFLICT,
    MixedOffsets: HTTPStatus.CONFLICT,
    NoCandidates: HTTPStatus.CONFLICT,
    InsufficientData: HTTPStatus.CONFLICT,
    StorageFailure: HTTPStatus.INTERNAL_SERVER_ERROR,
}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: Path = Path("./mealtrace-data")
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    threshold: float = 50.0


class HttpError(Exception):
    def __init__(self, status: HTTPStatus, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def parse_sample_batch(body: bytes) -> list[GlucoseSample]:
    try:
        doc = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed JSON body: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
        raise ParseError('body must be {"samples": [...]}')
    samples = []
    for i, item in enumerate(doc["samples"]):
        if not isinstance(item, dict) or "timestamp" not in item or "glucose_mmol_l" not in item:
            raise ParseError(f"samples[{i}] needs timestamp and glucose_mmol_l")
        ts, value = item["timestamp"], item["glucose_mmol_l"]
        if not isinstance(ts, str):
            raise ParseError(f"samples[{i}].timestamp must be a string")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"samples[{i}].glucose_mmol_l must be a number")
        try:
            samples.append(GlucoseSample(parse_timestamp(ts), value))
        except ParseError as exc:
            raise type(exc)(f"samples[{i}]: {exc}") from None
    return samples


def parse_query(query: str) -> dict[str, list[str]]:
    # no plus-to-space decoding: "+05:30" offsets arrive unescaped from most clients
    out: dict[str, list[str]] = {}
    for part in query.split("&"):
        if part:
            key, _, value = part.partition("=")
            out.setdefault(unquote(key), []).append(unquote(value))
    return out


class Handler(BaseHTTPRequestHandler):
    server: "MealtraceServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # route through logging instead of stderr
        log.info("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: str) -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, code: str, message: str) -> None:
        self._send(status, report.dumps({"error": code, "message": message}))

    def _dispatch(self, method: str) -> None:
        url = urlsplit(self.path)
        parts = [unquote(p) for p in url.path.split("/")[1:]]
        try:
            if method == "GET" and parts == ["healthz"]:
                return self._send(HTTPStatus.OK, report.dumps({"status": "ok"}))
            if len(parts) == 4 and parts[:2] == ["v1", "participants"] and parts[2]:
                pid, action = parts[2], parts[3]
                route = (method, action)
                if route == ("POST", "samples"):
                    return self._send(HTTPStatus.OK, self.server.post_samples(pid, self._body()))
                if route == ("GET", "completeness"):
                    return self._send(HTTPStatus.OK, self.server.get_completeness(pid, parse_query(url.query)))
                if route == ("GET", "routine"):
                    return self._send(HTTPStatus.OK, self.server.get_routine(pid))
                if route == ("GET", "events"):
                    return self._send(HTTPStatus.OK, self.server.get_events(pid))
            raise HttpError(HTTPStatus.NOT_FOUND, "not_found", f"no route for {method} {url.path}")
        except HttpError as exc:
            self._error(exc.status, exc.code, str(exc))
        except MealtraceError as exc:
            status = next((s for t, s in STATUS.items() if isinstance(exc, t)), HTTPStatus.INTERNAL_SERVER_ERROR)
            self._error(status, exc.code, str(exc))
        except Exception as exc:  # keep the worker alive on bugs
            log.exception("unhandled error")
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, "internal_error", str(exc))

    def _body(self) -> bytes:
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            raise HttpError(HTTPStatus.LENGTH_REQUIRED, "length_required", "Content-Length required") from None
        if length < 0 or length > MAX_BODY:
            raise HttpError(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, "body_too_large", "request body too large")
        return self.rfile.read(length)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


class MealtraceServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.log = SampleLog(config.data_dir)
        try:
            super().__init__((config.host, config.port), Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {config.host}:{config.port}: {exc.strerror}") from exc
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def post_samples(self, pid: str, body: bytes) -> str:
        result = self.log.append(pid, parse_sample_batch(body))
        return report.dumps({"accepted": result.accepted, "duplicates": result.duplicates})

    def get_completeness(self, pid: str, query: dict[str, list[str]]) -> str:
        try:
            start = parse_timestamp(query["start"][0])
            end = parse_timestamp(query["end"][0])
            threshold = float(query.get("threshold", [self.config.threshold])[0])
        except (KeyError, ValueError) as exc:
            raise HttpError(HTTPStatus.BAD_REQUEST, "bad_window", f"start/end query parameters: {exc}") from None
        series = self.log.load(pid)
        rep = completeness(series, StudyWindow(start, end), self.config.sampling.nominal_period, threshold)
        return report.dumps(report.completeness_to_dict(rep))

    def get_routine(self, pid: str) -> str:
        analysis = analyze(self.log.load(pid), self.config.sampling, self.config.detector)
        return report.dumps(report.analysis_to_dict(analysis))

    def get_events(self, pid: str) -> str:
        analysis = analyze(self.log.load(pid), self.config.sampling, self.config.detector)
        return report.dumps(report.events_to_list(analysis.events))

    def start(self) -> "MealtraceServer":
        self._thread = threading.Thread(
            target=self.serve_forever, kwargs={"poll_interval": 0.05}, name="mealtrace-http", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()


def serve(config: ServiceConfig) -> MealtraceServer:
    """Bind and start serving in a background thread; returns the running server."""
    return MealtraceServer(config).start()
