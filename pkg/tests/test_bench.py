import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from saliency_flow.bench import compare_schemes, loglog_slope, timing_sweep, violation_sweep
from saliency_flow.errors import ParameterError
from saliency_flow.exporter import BENCH_COLUMNS, write_bench_csv
from saliency_flow.models import BenchRecord, FlowParams, RStopping, SchemeComparison


@pytest.fixture
def compare_params() -> FlowParams:
    return FlowParams(
        p=1.0, epsilon=0.1, alpha=2.0, delta=1.8, tau=0.05, n_steps=3, rho=1.0,
        r_stopping=RStopping.FIXED, inner_steps=2,
    )


def test_compare_schemes_records_every_inner_iteration(small_phantom, compare_params: FlowParams) -> None:
    comparison = compare_schemes(small_phantom.image, compare_params)
    keys = [(d.step, d.inner) for d in comparison.inner_differences]
    assert keys == [(n, j) for n in (1, 2, 3) for j in (0, 1)]
    assert all(d.relative_difference >= 0 for d in comparison.inner_differences)
    assert comparison.foreground_pixels > 0
    assert comparison.final_relative_difference >= 0


def test_compare_schemes_report_is_json_safe(small_phantom, compare_params: FlowParams) -> None:
    report = compare_schemes(small_phantom.image, compare_params).to_dict()
    assert set(report) == {
        "inner_differences",
        "final_relative_difference",
        "mask_disagreement",
        "foreground_pixels",
        "disagreement_fraction",
        "violation",
    }
    json.dumps(report, allow_nan=False)


def test_disagreement_fraction_with_empty_foreground() -> None:
    base = dict(inner_differences=[], final_relative_difference=0.0,
                negative_violation=0.0, upper_violation=0.0)
    assert SchemeComparison(mask_disagreement=0, foreground_pixels=0, **base).disagreement_fraction == 0.0
    assert SchemeComparison(mask_disagreement=3, foreground_pixels=0, **base).disagreement_fraction is None
    assert SchemeComparison(mask_disagreement=3, foreground_pixels=12, **base).disagreement_fraction == 0.25


def test_violation_sweep_keeps_order(compare_params: FlowParams) -> None:
    f = np.full((6, 6), 0.99)
    points = violation_sweep(f, compare_params, [0.25, 0.5, 0.125])
    assert [r for r, _ in points] == [0.25, 0.5, 0.125]
    values = dict(points)
    assert values[0.125] < values[0.25] < values[0.5]


def test_loglog_slope() -> None:
    points = [(r, 3.0 * r**2) for r in (0.5, 0.25, 0.125, 0.0625)]
    assert loglog_slope(points) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        loglog_slope([(0.5, 0.0), (0.25, 1.0)])


def test_timing_sweep_order_and_callback(fixed_params: FlowParams) -> None:
    f = np.linspace(0.0, 1.0, 144).reshape(12, 12)
    seen: list[BenchRecord] = []
    records = timing_sweep(
        f, [2.0, 1.0], [8, 4], ["quantized", "explicit"], fixed_params, on_record=seen.append
    )
    assert [(r.scheme, r.rho, r.q_levels) for r in records] == [
        ("quantized", 1.0, 4), ("quantized", 1.0, 8), ("quantized", 2.0, 4), ("quantized", 2.0, 8),
        ("explicit", 1.0, 4), ("explicit", 1.0, 8), ("explicit", 2.0, 4), ("explicit", 2.0, 8),
    ]
    assert seen == records
    assert all(r.pixels == 144 and r.seconds >= 0 for r in records)
    assert all(r.steps == fixed_params.n_steps for r in records if r.scheme == "explicit")


def test_timing_sweep_runs_every_step_in_every_cell(small_phantom, fixed_params: FlowParams) -> None:
    params = replace(fixed_params, n_steps=12, early_stop_tol=1e-3)
    records = timing_sweep(
        small_phantom.image, [1.0, 2.0], [2, 16], ["quantized", "explicit", "yosida"], params
    )
    assert len(records) == 12
    assert [r.steps for r in records] == [params.n_steps] * len(records)


def test_timing_sweep_rejects_empty_lists(fixed_params: FlowParams) -> None:
    with pytest.raises(ParameterError):
        timing_sweep(np.ones((4, 4)), [], [8], ["explicit"], fixed_params)


def test_write_bench_csv(tmp_path) -> None:
    records = [
        BenchRecord("quantized", 5.0, 256, 4096, 50, 0.5),
        BenchRecord("explicit", 5.0, 256, 4096, 50, 1.25),
    ]
    path = write_bench_csv(records, tmp_path / "out" / "bench.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(BENCH_COLUMNS)
    table = pd.read_csv(path)
    assert table["Q"].tolist() == [256, 256]
    assert table["scheme"].tolist() == ["quantized", "explicit"]
