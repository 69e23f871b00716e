"""Command-line front end: ``mealtrace {ingest,audit,detect,simulate,serve}``.

Exit codes: 0 success, 2 usage/parse/data error, 3 participant excluded by
the completeness gate, 4 nothing to detect, 5 storage failure.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
from datetime import datetime, time, timedelta
from pathlib import Path
from typing import Sequence

from . import report
from .audit import StudyWindow, completeness
from .config import FORMATS, CliConfig, resolve
from .detector import analyze
from .errors import (
    InsufficientData,
    MealtraceError,
    NoCandidates,
    StorageFailure,
    UnknownParticipant,
)
from .io import group_records, read_records, write_csv
from .store import SampleLog
from .synthgen import generate, load_profile
from .timeseries import ParticipantSeries, build_series, format_timestamp

log = logging.getLogger("mealtrace")

EXIT_OK, EXIT_USAGE, EXIT_EXCLUDED, EXIT_NO_CANDIDATES, EXIT_STORAGE = 0, 2, 3, 4, 5


class CliExit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def exit_code_for(exc: MealtraceError) -> int:
    if isinstance(exc, (NoCandidates, InsufficientData)):
        return EXIT_NO_CANDIDATES
    if isinstance(exc, StorageFailure):
        return EXIT_STORAGE
    return EXIT_USAGE


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--data-dir", default=default, help="sample store directory")
    parser.add_argument("--config", default=default, metavar="FILE", help="flat key=value config file")
    parser.add_argument("--format", choices=FORMATS, default=default, help="output format")
    parser.add_argument("-v", "--verbose", action="store_true", default=default)


def _window_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--start", help="study window start, RFC3339 with offset")
    parser.add_argument("--end", help="study window end (exclusive), RFC3339 with offset")
    parser.add_argument("--period", type=float, metavar="SECONDS", help="nominal sampling period")
    parser.add_argument("--threshold", type=float, metavar="PCT", help="inclusion threshold, strict >")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mealtrace", description="Mealtime routines from CGM timeseries")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    p = sub.add_parser("ingest", parents=[common], help="append CSV/JSONL samples to the store")
    p.add_argument("files", nargs="+", type=Path)

    p = sub.add_parser("audit", parents=[common], help="completeness report: per-participant summary and daily counts")
    _window_options(p)
    p.add_argument("--participant", help="report a single participant")

    p = sub.add_parser("detect", parents=[common], help="run mealtime detection for one participant")
    p.add_argument("--participant", required=True, metavar="ID")
    p.add_argument("--svg", type=Path, metavar="DIR", help="write routine, boxplot and timeseries SVGs")
    p.add_argument("--force", action="store_true", help="skip the completeness inclusion gate")
    p.add_argument("--window-len", type=int, metavar="N")
    p.add_argument("--iqr-factor", type=float, metavar="X")
    p.add_argument("--merge-gap", type=float, metavar="MIN")
    p.add_argument("--no-positive-filter", action="store_true", help="keep falling-edge outliers as candidates")
    p.add_argument("--hour-bins", action="store_true", help="echo the 24 hourly counts on stderr")
    _window_options(p)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic series from a profile")
    p.add_argument("profile", type=Path)
    p.add_argument("--output-dir", type=Path, default=Path("."), metavar="DIR")

    p = sub.add_parser("serve", parents=[common], help="run the HTTP collector")
    p.add_argument("--addr", metavar="HOST:PORT")
    return parser


def _config(args: argparse.Namespace) -> CliConfig:
    flags = {
        "data_dir": args.data_dir,
        "format": args.format,
        "start": getattr(args, "start", None),
        "end": getattr(args, "end", None),
        "period": getattr(args, "period", None),
        "threshold": getattr(args, "threshold", None),
        "window_len": getattr(args, "window_len", None),
        "iqr_factor": getattr(args, "iqr_factor", None),
        "merge_gap": getattr(args, "merge_gap", None),
        "addr": getattr(args, "addr", None),
    }
    if getattr(args, "no_positive_filter", False):
        flags["positive_filter"] = False
    return resolve(flags, config_file=args.config)


# -- commands -----------------------------------------------------------------

def cmd_ingest(cfg: CliConfig, files: Sequence[Path]) -> str:
    records = []
    for path in files:
        try:
            records.extend(read_records(path))
        except OSError as exc:
            raise CliExit(EXIT_USAGE, f"{path}: {exc.strerror}") from None
    grouped = group_records(records)
    for pid, samples in grouped.items():
        build_series(pid, samples)  # reject conflicts/mixed offsets before touching the store
    store = SampleLog(cfg.data_dir)
    rows = []
    for pid in sorted(grouped):
        res = store.append(pid, grouped[pid])
        rows.append((pid, res.accepted, res.duplicates))

    if cfg.output_format == "json":
        return report.dumps(
            {"participants": [{"participant_id": p, "accepted": a, "duplicates": d} for p, a, d in rows]}
        )
    header = ("participant_id", "accepted", "duplicates")
    if cfg.output_format == "csv":
        return report._csv([header, *rows])
    return report.text_table(header, rows)


def _series_window(series: ParticipantSeries) -> StudyWindow:
    """Whole local days spanned by the series; used when no window is configured."""
    tz = series.offset
    first = series.samples[0].timestamp.astimezone(tz)
    last = series.samples[-1].timestamp.astimezone(tz)
    start = datetime.combine(first.date(), time(0), tzinfo=tz)
    end = datetime.combine(last.date() + timedelta(days=1), time(0), tzinfo=tz)
    return StudyWindow(start, end)


def cmd_audit(cfg: CliConfig, participant: str | None = None) -> str:
    window = cfg.window()
    if window is None:
        raise CliExit(EXIT_USAGE, "audit needs --start and --end (or start/end in the config file)")
    store = SampleLog(cfg.data_dir)
    pids = [participant] if participant else store.participants()
    reports = [completeness(store.load(pid), window, cfg.period, cfg.threshold) for pid in pids]

    if participant and cfg.output_format == "json":
        return report.dumps(report.completeness_to_dict(reports[0]))
    if cfg.output_format == "json":
        return report.dumps(report.audit_to_dict(reports, window, cfg.period.total_seconds(), cfg.threshold))
    if cfg.output_format == "csv":
        out = report.summary_csv(reports)
        return out + "\n" + report.daily_csv(reports) if reports else out
    return report.audit_text(reports)


def cmd_detect(
    cfg: CliConfig,
    participant: str,
    *,
    svg_dir: Path | None = None,
    force: bool = False,
    hour_bins: bool = False,
) -> str:
    store = SampleLog(cfg.data_dir)
    series = store.load(participant)
    if not force:
        if not len(series):
            raise CliExit(EXIT_EXCLUDED, f"excluded_by_completeness: {participant} has no samples")
        window = cfg.window() or _series_window(series)
        rep = completeness(series, window, cfg.period, cfg.threshold)
        if not rep.included:
            raise CliExit(
                EXIT_EXCLUDED,
                f"excluded_by_completeness: {participant} at {rep.percentage:.1f}% "
                f"(needs > {cfg.threshold:g}%); use --force to analyze anyway",
            )
    analysis = analyze(series, cfg.sampling, cfg.detector)
    if svg_dir is not None:
        from .plotting import write_figures  # matplotlib import is slow; only pay for it here

        for path in write_figures(series, analysis, svg_dir):
            log.info("wrote %s", path)
    if hour_bins:
        print(",".join(str(c) for c in analysis.routine.counts), file=sys.stderr)
    if cfg.output_format == "json":
        return report.dumps(report.analysis_to_dict(analysis))
    if cfg.output_format == "csv":
        return report.analysis_csv(analysis)
    return report.analysis_text(analysis)


def cmd_simulate(profile_file: Path, output_dir: Path) -> tuple[Path, Path]:
    profile = load_profile(profile_file)
    result = generate(profile)
    output_dir.mkdir(parents=True, exist_ok=True)
    stem = profile.participant_id.replace("/", "_")
    csv_path = output_dir / f"{stem}.csv"
    truth_path = output_dir / f"{stem}.truth.json"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        write_csv([result.series], fh)
    truth_path.write_text(report.dumps([format_timestamp(t) for t in result.truth]), encoding="utf-8")
    return csv_path, truth_path


def cmd_serve(cfg: CliConfig) -> None:
    from .service import ServiceConfig, serve

    host, port = cfg.bind_address()
    server = serve(
        ServiceConfig(
            host=host,
            port=port,
            data_dir=cfg.data_dir,
            sampling=cfg.sampling,
            detector=cfg.detector,
            threshold=cfg.threshold,
        )
    )
    print(f"mealtrace listening on {server.url}", file=sys.stderr, flush=True)
    stop = lambda *_: server.shutdown()  # noqa: E731
    signal.signal(signal.SIGTERM, stop)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        if args.command == "ingest":
            out = cmd_ingest(cfg, args.files)
        elif args.command == "audit":
            out = cmd_audit(cfg, args.participant)
        elif args.command == "detect":
            out = cmd_detect(cfg, args.participant, svg_dir=args.svg, force=args.force, hour_bins=args.hour_bins)
        elif args.command == "simulate":
            csv_path, truth_path = cmd_simulate(args.profile, args.output_dir)
            out = f"{csv_path}\n{truth_path}\n"
        else:
            cmd_serve(cfg)
            return EXIT_OK
    except CliExit as exc:
        print(f"mealtrace: {exc}", file=sys.stderr)
        return exc.code
    except UnknownParticipant as exc:
        print(f"mealtrace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MealtraceError as exc:
        print(f"mealtrace: {exc.code}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    sys.stdout.write(out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
