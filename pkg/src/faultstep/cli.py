"""Command-line entry point: run, resume, bench, report, inspect.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime error,
3 run ended resumable after a termination notice (schedulers can requeue
on 3 and call ``resume`` next time).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, metrics, store
from .config import load_setup
from .detector import TerminationWatcher
from .errors import ConfigError, EmptySamples, FaultstepError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_RESUMABLE = 3


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="TOML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="TABLE.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    parser.add_argument(
        "--records",
        default=None,
        help="records output path (default: <checkpoint_dir>/records.json)",
    )


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultstep",
        description="checkpoint/restart toolkit for iterative BSP programs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("run", "execute a run under the configured checkpoint strategy"),
        ("resume", "continue from the latest committed checkpoint"),
        ("bench", "paired instrumented/baseline timing runs"),
    ):
        p = sub.add_parser(name, help=text)
        _add_config_args(p)

    p = sub.add_parser("report", help="print the overhead report for a records file")
    p.add_argument("--records", required=True, help="records file (CSV or JSON)")
    p.add_argument(
        "--format",
        choices=("auto", "csv", "json"),
        default="auto",
        help="force the records parser (default: detect by content)",
    )

    p = sub.add_parser("inspect", help="describe a checkpoint file")
    p.add_argument("file", help="checkpoint file path")
    return parser


def _records_path(args, setup) -> Path:
    if args.records:
        return Path(args.records)
    return Path(setup.run.checkpoint_dir) / "records.json"


def _export_records(records, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = "csv" if path.suffix == ".csv" else "json"
    metrics.export(records, path, fmt)


def _run_or_resume(args, out, resume: bool) -> int:
    setup = load_setup(args.config, args.overrides)
    watcher = TerminationWatcher()
    try:
        watcher.bind_signal(setup.run.termination_signal)
    except FaultstepError:
        watcher = TerminationWatcher()  # signal already routed elsewhere
    try:
        if resume:
            result = harness.resume(setup.app, setup.run, watcher=watcher)
        else:
            result = harness.run(
                setup.app, setup.run, setup.plan, watcher=watcher
            )
    finally:
        watcher.unbind_signal()
    records_path = _records_path(args, setup)
    _export_records([result.record], records_path)
    print("status: %s" % result.status, file=out)
    print("last_epoch: %s" % (
        result.last_epoch if result.last_epoch is not None else "none"
    ), file=out)
    print("total_wall_s: %.6f" % result.record.total_wall_s, file=out)
    print("records: %s" % records_path, file=out)
    if result.status == harness.STATUS_RESUMABLE:
        return EXIT_RESUMABLE
    return EXIT_OK


def _cmd_bench(args, out) -> int:
    setup = load_setup(args.config, args.overrides)
    instrumented, baseline = harness.bench(
        setup.app, setup.run, setup.bench_repetitions
    )
    records_path = _records_path(args, setup)
    _export_records(instrumented + baseline, records_path)
    print("records: %s" % records_path, file=out)
    _print_report(instrumented + baseline, records_path, out)
    return EXIT_OK


def _cmd_report(args, out) -> int:
    records_path = Path(args.records)
    records = metrics.load_records(records_path, format=args.format)
    _print_report(records, records_path, out)
    return EXIT_OK


def _print_report(records, records_path: Path, out) -> None:
    with_s = [
        r.total_wall_s for r in records
        if r.variant == metrics.VARIANT_INSTRUMENTED
    ]
    without_s = [
        r.total_wall_s for r in records
        if r.variant == metrics.VARIANT_BASELINE
    ]
    if not with_s or not without_s:
        raise EmptySamples(
            "records must include both instrumented and baseline runs"
        )
    report = metrics.relative_overhead(with_s, without_s)
    summary_path = Path(str(records_path) + ".summary")
    metrics.write_summary(records, summary_path)
    print("median_with_s: %.6f" % report.median_with_s, file=out)
    print("median_without_s: %.6f" % report.median_without_s, file=out)
    print("relative_overhead: %.6f" % report.relative_overhead, file=out)
    print("std_with_s: %.6f" % report.std_with_s, file=out)
    print("std_without_s: %.6f" % report.std_without_s, file=out)
    print("summary: %s" % summary_path, file=out)


def _cmd_inspect(args, out) -> int:
    out.write(store.inspect_file(args.file))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    out = sys.stdout
    try:
        if args.command == "run":
            return _run_or_resume(args, out, resume=False)
        if args.command == "resume":
            return _run_or_resume(args, out, resume=True)
        if args.command == "bench":
            return _cmd_bench(args, out)
        if args.command == "report":
            return _cmd_report(args, out)
        if args.command == "inspect":
            return _cmd_inspect(args, out)
        parser.error("unknown command %r" % args.command)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except FaultstepError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
