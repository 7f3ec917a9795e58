"""Run measurement: overhead arithmetic, run records, plot-ready export.

The comparison methodology is median-based: medians resist the extreme
values that occasional slow runs produce, so the headline number is the
median relative overhead

    overhead = (median_instrumented - median_baseline) / median_instrumented

and the failure-free estimate is (t_ff - t_base) / t_ff.  Records export
to CSV (one summary row per run) or JSON (lossless), plus a box-plot
summary file with min/q1/median/q3/max per variant.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .errors import EmptySamples, IoFailure, NonPositiveTime, ParseError

VARIANT_INSTRUMENTED = "instrumented"
VARIANT_BASELINE = "baseline"
VARIANTS = (VARIANT_INSTRUMENTED, VARIANT_BASELINE)

CSV_HEADER = ["run_id", "variant", "total_wall_s", "fault_count"]
SUMMARY_HEADER = ["variant", "count", "min", "q1", "median", "q3", "max"]


@dataclass(frozen=True)
class RunRecord:
    """Timing facts of one complete run."""

    run_id: str
    variant: str  # VARIANT_INSTRUMENTED or VARIANT_BASELINE
    total_wall_s: float
    superstep_wall_s: tuple[float, ...] = ()
    checkpoint_cost_s: tuple[float, ...] = ()
    recovery_cost_s: tuple[float, ...] = ()
    fault_count: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError("unknown variant %r" % self.variant)
        if self.total_wall_s <= 0:
            raise ValueError("total_wall_s must be positive")
        if self.fault_count < 0:
            raise ValueError("fault_count must be non-negative")
        # Normalize lists passed by callers into immutable tuples.
        for name in ("superstep_wall_s", "checkpoint_cost_s", "recovery_cost_s"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True)
class OverheadReport:
    median_with_s: float
    median_without_s: float
    relative_overhead: float
    std_with_s: float
    std_without_s: float


def median(samples: Sequence[float]) -> float:
    """Sorted middle element; mean of the two middles for even counts."""
    if not samples:
        raise EmptySamples("median of zero samples")
    return statistics.median(samples)


def sample_stdev(samples: Sequence[float]) -> float:
    """Standard deviation with the n-1 denominator; 0 for a single sample."""
    if not samples:
        raise EmptySamples("stdev of zero samples")
    if len(samples) == 1:
        return 0.0
    return statistics.stdev(samples)


def relative_overhead(
    samples_with: Sequence[float], samples_without: Sequence[float]
) -> OverheadReport:
    """Median relative overhead of instrumented over baseline timings."""
    if not samples_with or not samples_without:
        raise EmptySamples("both sample lists must be nonempty")
    median_with = median(samples_with)
    median_without = median(samples_without)
    return OverheadReport(
        median_with_s=median_with,
        median_without_s=median_without,
        relative_overhead=(median_with - median_without) / median_with,
        std_with_s=sample_stdev(samples_with),
        std_without_s=sample_stdev(samples_without),
    )


def failure_free_overhead(t_ff: float, t_base: float) -> float:
    if t_ff <= 0:
        raise NonPositiveTime("t_ff must be positive, got %g" % t_ff)
    if t_base <= 0:
        raise NonPositiveTime("t_base must be positive, got %g" % t_base)
    return (t_ff - t_base) / t_ff


def quantile(samples: Sequence[float], q: float) -> float:
    """Linear interpolation between closest ranks of the sorted samples.

    With n points the rank of quantile q is h = (n-1)*q; fractional ranks
    interpolate between the neighbors.
    """
    if not samples:
        raise EmptySamples("quantile of zero samples")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    ordered = sorted(samples)
    h = (len(ordered) - 1) * q
    lo = int(h)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


def five_number_summary(samples: Sequence[float]) -> tuple[float, float, float, float, float]:
    return (
        min(samples),
        quantile(samples, 0.25),
        median(samples),
        quantile(samples, 0.75),
        max(samples),
    )


# --- export and import ------------------------------------------------------

def export(records: Sequence[RunRecord], path, format: str) -> Path:
    """Write records to ``path`` as ``csv`` or ``json``.

    A box-plot summary (one row per variant present) goes to
    ``<path>.summary`` either way.  JSON keeps every field and
    round-trips losslessly; CSV keeps the per-run headline columns only.
    """
    if not records:
        raise EmptySamples("export of zero records")
    path = Path(path)
    try:
        if format == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_HEADER)
                for rec in records:
                    writer.writerow(
                        [rec.run_id, rec.variant, repr(rec.total_wall_s), rec.fault_count]
                    )
        elif format == "json":
            with open(path, "w") as fh:
                json.dump([asdict(rec) for rec in records], fh, indent=2)
                fh.write("\n")
        else:
            raise ValueError("unknown export format %r" % format)
        write_summary(records, Path(str(path) + ".summary"))
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc)) from exc
    return path


def write_summary(records: Sequence[RunRecord], path) -> None:
    """Box-plot rows (min/q1/median/q3/max of total wall time) per variant."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_HEADER)
            for variant in VARIANTS:
                totals = [r.total_wall_s for r in records if r.variant == variant]
                if not totals:
                    continue
                lo, q1, mid, q3, hi = five_number_summary(totals)
                writer.writerow(
                    [variant, len(totals)]
                    + ["%.6f" % v for v in (lo, q1, mid, q3, hi)]
                )
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc)) from exc


def load_records(path, format: str = "auto") -> list[RunRecord]:
    """Read records back from a CSV or JSON export.

    ``format`` forces the parser; the default sniffs the content (JSON
    exports start with an array bracket).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (path, exc)) from exc
    if format == "json" or (format == "auto" and text.lstrip().startswith("[")):
        return _load_json(text, path)
    return _load_csv(text, path)


def _load_json(text: str, path: Path) -> list[RunRecord]:
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise ParseError("%s: invalid JSON: %s" % (path, exc)) from exc
    if not isinstance(raw, list):
        raise ParseError("%s: expected a JSON array of records" % path)
    records = []
    for i, item in enumerate(raw):
        try:
            records.append(RunRecord(**item))
        except (TypeError, ValueError) as exc:
            raise ParseError("%s: record %d: %s" % (path, i, exc)) from exc
    return records


def _load_csv(text: str, path: Path) -> list[RunRecord]:
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0] != CSV_HEADER:
        raise ParseError(
            "%s: line 1: expected header %s" % (path, ",".join(CSV_HEADER))
        )
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(
                "%s: line %d: expected %d fields, got %d"
                % (path, lineno, len(CSV_HEADER), len(row))
            )
        run_id, variant, total, faults = row
        try:
            record = RunRecord(
                run_id=run_id,
                variant=variant,
                total_wall_s=float(total),
                fault_count=int(faults),
            )
        except ValueError as exc:
            raise ParseError("%s: line %d: %s" % (path, lineno, exc)) from exc
        records.append(record)
    return records
