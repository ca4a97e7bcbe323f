import pandas as pd
import pytest

from saliency_flow import processor
from saliency_flow.converter import write_field, write_mask
from saliency_flow.exporter import METRICS_COLUMNS
from saliency_flow.models import FlowParams, PipelineOptions
from saliency_flow.phantom import make_phantom
from saliency_flow.processor import run_batch, summarize


@pytest.fixture
def dataset_dir(tmp_path):
    directory = tmp_path / "cases"
    directory.mkdir()
    for seed in range(3):
        phantom = make_phantom((24, 24), seed=seed)
        write_field(directory / f"case{seed}_flair.pgm", phantom.image)
        write_mask(directory / f"case{seed}_seg.pgm", phantom.truth)
    return directory


@pytest.fixture
def batch_options() -> PipelineOptions:
    return PipelineOptions(scheme="explicit", track_energy=False)


def test_run_batch_writes_metrics(dataset_dir, tmp_path, fixed_params: FlowParams, batch_options) -> None:
    output = tmp_path / "metrics.csv"
    masks = tmp_path / "masks"
    stats = run_batch(dataset_dir, output, fixed_params, batch_options, out_dir=masks)

    assert stats.total_cases == 3
    assert stats.processed_cases == 3
    assert stats.failed_cases == 0
    assert not stats.interrupted
    assert sorted(p.name for p in masks.iterdir()) == [f"case{i}_mask.pgm" for i in range(3)]

    table = pd.read_csv(output)
    assert list(table.columns) == METRICS_COLUMNS
    assert table["case"].tolist() == ["case0", "case1", "case2"]
    assert (table["status"] == "OK").all()
    assert (table["delta"] == 2.0).all()
    assert (table["dice"] > 0.9).all()


def test_run_batch_resume_skips_done_cases(dataset_dir, tmp_path, fixed_params: FlowParams, batch_options) -> None:
    output = tmp_path / "metrics.csv"
    first = run_batch(dataset_dir, output, fixed_params, batch_options, case_limit=2)
    assert first.processed_cases == 2

    second = run_batch(dataset_dir, output, fixed_params, batch_options, resume=True)
    assert second.resumed_from == 2
    assert second.processed_cases == 1
    assert pd.read_csv(output)["case"].tolist() == ["case0", "case1", "case2"]

    third = run_batch(dataset_dir, output, fixed_params, batch_options, resume=True)
    assert third.processed_cases == 0


def test_run_batch_records_failures(dataset_dir, tmp_path, fixed_params: FlowParams, batch_options) -> None:
    (dataset_dir / "case1_flair.pgm").write_bytes(b"P5\n2 2\n255\n")
    output = tmp_path / "metrics.csv"
    stats = run_batch(dataset_dir, output, fixed_params, batch_options)
    assert stats.failed_cases == 1
    assert stats.errors[0].startswith("case1")
    assert stats.success_rate == pytest.approx(200 / 3)
    table = pd.read_csv(output)
    assert table.set_index("case").loc["case1", "status"] == "ОШИБКА"


def test_run_batch_parallel_keeps_case_order(dataset_dir, tmp_path, fixed_params: FlowParams, batch_options) -> None:
    output = tmp_path / "metrics.csv"
    stats = run_batch(dataset_dir, output, fixed_params, batch_options, workers=2)
    assert stats.processed_cases == 3
    assert pd.read_csv(output)["case"].tolist() == ["case0", "case1", "case2"]


def test_summarize_uses_last_row_per_case(dataset_dir, tmp_path, fixed_params: FlowParams, batch_options) -> None:
    output = tmp_path / "metrics.csv"
    run_batch(dataset_dir, output, fixed_params, batch_options)
    run_batch(dataset_dir, output, fixed_params, batch_options)
    summary = summarize(output)
    assert summary["cases"] == 3
    assert summary["flow"]["count"] == {"images": 3}
    assert summary["flow"]["macro"]["dice"] > 0.9
    assert summary["baseline_macro_dice"] is not None


def test_summarize_missing_file(tmp_path) -> None:
    summary = summarize(tmp_path / "none.csv")
    assert summary["cases"] == 0
    assert summary["flow"]["macro"]["dice"] is None


def test_parallel_interrupt_writes_every_counted_case(
    dataset_dir, tmp_path, fixed_params: FlowParams, batch_options, monkeypatch
) -> None:
    def _last_then_interrupt(futures):
        last = list(futures)[-1]
        last.result()
        yield last
        raise KeyboardInterrupt

    monkeypatch.setattr(processor, "as_completed", _last_then_interrupt)
    output = tmp_path / "metrics.csv"
    stats = run_batch(dataset_dir, output, fixed_params, batch_options, workers=2)

    assert stats.interrupted
    assert stats.processed_cases == 1
    table = pd.read_csv(output)
    assert table["case"].tolist() == ["case2"]
    assert len(table) == stats.processed_cases

    monkeypatch.undo()
    resumed = run_batch(dataset_dir, output, fixed_params, batch_options, resume=True)
    assert resumed.resumed_from == 1
    assert resumed.processed_cases == 2
    assert sorted(pd.read_csv(output)["case"]) == ["case0", "case1", "case2"]
