import math
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from faultstep.errors import EmptySamples, NonPositiveTime, ParseError
from faultstep.metrics import (
    CSV_HEADER,
    VARIANT_BASELINE,
    VARIANT_INSTRUMENTED,
    OverheadReport,
    RunRecord,
    export,
    failure_free_overhead,
    five_number_summary,
    load_records,
    median,
    quantile,
    relative_overhead,
    sample_stdev,
)

# Median run times of the reference measurement: 13441.8312 s instrumented,
# 13266.8864 s baseline (their difference is 174.9448 s). The frozen ratio
# below is 174.9448 / 13441.8312 evaluated with Decimal at 30 digits.
MEDIAN_WITH = 13441.8312
MEDIAN_WITHOUT = 13266.8864
OVERHEAD_ORACLE = 0.0130149529031431372237437411058


def test_overhead_oracle_self_check():
    ratio = Decimal("174.9448") / Decimal("13441.8312")
    assert float(ratio) == pytest.approx(OVERHEAD_ORACLE, rel=1e-15)


# -- median -------------------------------------------------------------------


def test_median_odd():
    assert median([3, 1, 2]) == 2


def test_median_even_is_mean_of_middles():
    assert median([1, 2, 3, 4]) == 2.5


def test_median_singleton():
    assert median([5]) == 5


def test_median_empty_rejected():
    with pytest.raises(EmptySamples):
        median([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_median_within_bounds(samples):
    m = median(samples)
    assert min(samples) <= m <= max(samples)


def test_median_robust_to_inflating_the_maximum():
    samples = [4.0, 9.0, 2.0, 7.0, 5.0]
    inflated = sorted(samples)[:-1] + [max(samples) * 10]
    assert median(samples) == median(inflated)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1.0, 1e4), min_size=3, max_size=25, unique=True))
def test_median_robustness_property(samples):
    inflated = sorted(samples)[:-1] + [max(samples) * 10]
    assert median(samples) == median(inflated)


# -- overhead arithmetic ------------------------------------------------------


def test_reference_medians_give_frozen_overhead():
    # lists whose medians are exactly the reference values
    with_s = [MEDIAN_WITH - 1, MEDIAN_WITH, MEDIAN_WITH + 1]
    without_s = [MEDIAN_WITHOUT - 2, MEDIAN_WITHOUT, MEDIAN_WITHOUT + 2]
    report = relative_overhead(with_s, without_s)
    assert report.median_with_s == MEDIAN_WITH
    assert report.median_without_s == MEDIAN_WITHOUT
    assert report.relative_overhead == pytest.approx(OVERHEAD_ORACLE, rel=1e-12)
    assert round(report.relative_overhead, 6) == 0.013015


def test_identical_samples_give_zero_overhead():
    samples = [10.0, 11.0, 12.0]
    assert relative_overhead(samples, samples).relative_overhead == 0.0


def test_doubled_samples_give_half():
    base = [5.0, 6.0, 7.0]
    doubled = [2 * v for v in base]
    assert relative_overhead(doubled, base).relative_overhead == 0.5


def test_overhead_requires_nonempty_lists():
    with pytest.raises(EmptySamples):
        relative_overhead([], [1.0])
    with pytest.raises(EmptySamples):
        relative_overhead([1.0], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 1e5), min_size=1, max_size=30))
def test_overhead_identity_property(samples):
    assert relative_overhead(samples, samples).relative_overhead == 0.0


def test_stdev_uses_n_minus_one():
    assert sample_stdev([2.0, 4.0]) == pytest.approx(math.sqrt(2.0))
    assert sample_stdev([7.0]) == 0.0


def test_failure_free_overhead_cases():
    assert failure_free_overhead(100.0, 100.0) == 0.0
    assert failure_free_overhead(100.0, 99.0) == pytest.approx(0.01)
    assert failure_free_overhead(MEDIAN_WITH, MEDIAN_WITHOUT) == pytest.approx(
        OVERHEAD_ORACLE, rel=1e-12
    )
    with pytest.raises(NonPositiveTime):
        failure_free_overhead(0.0, 1.0)
    with pytest.raises(NonPositiveTime):
        failure_free_overhead(1.0, 0.0)


# -- quantiles ----------------------------------------------------------------


def _quantile_reference(samples, q):
    # brute-force restatement of the linear-interpolation definition:
    # rank h = (n-1) q, value = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)])
    xs = sorted(samples)
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    frac = h - lo
    if lo + 1 >= len(xs):
        return xs[-1]
    return xs[lo] + frac * (xs[lo + 1] - xs[lo])


def test_quartiles_of_one_through_eight():
    samples = [1, 2, 3, 4, 5, 6, 7, 8]
    assert _quantile_reference(samples, 0.25) == 2.75
    assert _quantile_reference(samples, 0.75) == 6.25
    assert quantile(samples, 0.25) == 2.75
    assert quantile(samples, 0.75) == 6.25


def test_five_number_summary():
    samples = [1, 2, 3, 4, 5, 6, 7, 8]
    assert five_number_summary(samples) == (1, 2.75, 4.5, 6.25, 8)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=40),
    st.floats(0.0, 1.0),
)
def test_quantile_matches_reference(samples, q):
    assert quantile(samples, q) == pytest.approx(
        _quantile_reference(samples, q), rel=1e-9, abs=1e-9
    )


def test_quantile_extremes_and_errors():
    assert quantile([3, 1, 2], 0.0) == 1
    assert quantile([3, 1, 2], 1.0) == 3
    with pytest.raises(EmptySamples):
        quantile([], 0.5)
    with pytest.raises(ValueError):
        quantile([1], 1.5)


# -- records and export -------------------------------------------------------


def _records(n_per_variant=10):
    out = []
    for i in range(n_per_variant):
        out.append(
            RunRecord(
                run_id="inst-%02d" % i,
                variant=VARIANT_INSTRUMENTED,
                total_wall_s=100.0 + i,
                superstep_wall_s=(1.0, 2.0),
                checkpoint_cost_s=(0.5,),
                recovery_cost_s=(),
                fault_count=i % 2,
            )
        )
        out.append(
            RunRecord(
                run_id="base-%02d" % i,
                variant=VARIANT_BASELINE,
                total_wall_s=90.0 + i,
            )
        )
    return out


def test_record_validation():
    with pytest.raises(ValueError):
        RunRecord(run_id="x", variant="other", total_wall_s=1.0)
    with pytest.raises(ValueError):
        RunRecord(run_id="x", variant=VARIANT_BASELINE, total_wall_s=0.0)
    with pytest.raises(ValueError):
        RunRecord(run_id="x", variant=VARIANT_BASELINE, total_wall_s=1.0,
                  fault_count=-1)
    rec = RunRecord(run_id="x", variant=VARIANT_BASELINE, total_wall_s=1.0,
                    superstep_wall_s=[1.0, 2.0])
    assert rec.superstep_wall_s == (1.0, 2.0)  # normalized to a tuple


def test_csv_export_row_counts(tmp_path):
    path = tmp_path / "runs.csv"
    export(_records(10), path, "csv")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 21  # header + 20 data rows
    summary = (tmp_path / "runs.csv.summary").read_text().strip().splitlines()
    assert len(summary) == 3  # header + 2 variant rows
    assert summary[1].startswith("instrumented,10,")
    assert summary[2].startswith("baseline,10,")


def test_summary_values_use_the_fixed_quantiles(tmp_path):
    records = [
        RunRecord(run_id="r%d" % v, variant=VARIANT_BASELINE, total_wall_s=float(v))
        for v in range(1, 9)
    ]
    export(records, tmp_path / "x.json", "json")
    row = (tmp_path / "x.json.summary").read_text().strip().splitlines()[1]
    assert row == "baseline,8,1.000000,2.750000,4.500000,6.250000,8.000000"


def test_json_roundtrip_is_lossless(tmp_path):
    records = _records(4)
    path = tmp_path / "runs.json"
    export(records, path, "json")
    assert load_records(path) == records
    # sniffing agrees with the explicit format
    assert load_records(path, format="json") == records


def test_csv_reimport_keeps_headline_fields(tmp_path):
    records = _records(3)
    path = tmp_path / "runs.csv"
    export(records, path, "csv")
    loaded = load_records(path)
    assert [(r.run_id, r.variant, r.total_wall_s, r.fault_count) for r in loaded] == [
        (r.run_id, r.variant, r.total_wall_s, r.fault_count) for r in records
    ]


def test_export_empty_rejected(tmp_path):
    with pytest.raises(EmptySamples):
        export([], tmp_path / "x.csv", "csv")


def test_export_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError):
        export(_records(1), tmp_path / "x.bin", "parquet")


def test_csv_parse_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("run_id,variant,total_wall_s,fault_count\na,baseline,1.0,0\nb,baseline,oops,0\n")
    with pytest.raises(ParseError) as err:
        load_records(path)
    assert "line 3" in str(err.value)

    path.write_text("wrong,header\n")
    with pytest.raises(ParseError) as err:
        load_records(path)
    assert "line 1" in str(err.value)

    path.write_text("run_id,variant,total_wall_s,fault_count\na,baseline,1.0\n")
    with pytest.raises(ParseError) as err:
        load_records(path)
    assert "line 2" in str(err.value)


def test_json_parse_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[{]")
    with pytest.raises(ParseError):
        load_records(path)
    path.write_text('{"not": "a list"}')
    with pytest.raises(ParseError):
        load_records(path)
    path.write_text('[{"run_id": "x", "variant": "baseline", "total_wall_s": -1}]')
    with pytest.raises(ParseError) as err:
        load_records(path)
    assert "record 0" in str(err.value)


def test_overhead_report_shape():
    report = relative_overhead([4.0, 5.0, 6.0], [4.0, 5.0, 6.0])
    assert isinstance(report, OverheadReport)
    assert report.std_with_s == report.std_without_s == pytest.approx(1.0)
