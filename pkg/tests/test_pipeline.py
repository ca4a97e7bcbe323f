import numpy as np
import pytest

from saliency_flow.errors import DimensionError, InputRangeError, ParameterError
from saliency_flow.models import FlowParams, Mode, PipelineOptions, Scheme
from saliency_flow.phantom import make_phantom
from saliency_flow.pipeline import (
    default_brain_mask,
    estimate_delta,
    finalize_mask,
    naive_baseline,
    naive_threshold,
    segment,
)
from saliency_flow.solver_explicit import run_explicit


def test_estimate_delta_examples() -> None:
    ones = np.ones((4, 4), dtype=np.uint8)
    assert estimate_delta(np.full((4, 4), 0.3), ones) == pytest.approx(2.65322, abs=1e-5)
    assert estimate_delta(np.zeros((4, 4)), ones) == pytest.approx(19.80198, abs=1e-5)


def test_estimate_delta_unit_regression_is_inverse_mean(rng: np.random.Generator) -> None:
    f = rng.uniform(0.1, 0.9, size=(10, 10))
    brain = f > 0.4
    expected = 1.0 / f[brain].mean()
    assert estimate_delta(f, brain, slope=1.0, intercept=0.0) == pytest.approx(expected)


def test_estimate_delta_uses_only_brain_pixels() -> None:
    f = np.zeros((4, 4))
    f[:2] = 0.3
    brain = f > 0
    assert estimate_delta(f, brain) == pytest.approx(2.65322, abs=1e-5)


def test_estimate_delta_errors() -> None:
    f = np.full((3, 3), 0.5)
    with pytest.raises(InputRangeError):
        estimate_delta(f, np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        estimate_delta(f, np.ones((3, 4)))
    with pytest.raises(ParameterError, match="mu_brain"):
        estimate_delta(f, np.ones((3, 3)), slope=-3.0, intercept=0.0)


def test_default_brain_mask_and_threshold() -> None:
    f = np.array([[0.0, 0.2], [0.6, 0.9]])
    np.testing.assert_array_equal(default_brain_mask(f), [[0, 1], [1, 1]])
    np.testing.assert_array_equal(naive_threshold(f, 2.0), [[0, 0], [1, 1]])
    np.testing.assert_array_equal(naive_threshold(f, 2.0, [[1, 1], [0, 1]]), [[0, 0], [0, 1]])
    assert naive_threshold(f, 2.0).dtype == np.uint8


def test_finalize_mask_half_is_foreground() -> None:
    np.testing.assert_array_equal(finalize_mask([0.0, 0.49, 0.5, 1.0]), [0, 0, 1, 1])


def test_naive_baseline_per_slice() -> None:
    f = np.stack([np.full((3, 3), 0.4), np.full((3, 3), 0.4)], axis=-1)
    mask = naive_baseline(f, [2.0, 3.0])
    assert mask[..., 0].sum() == 0
    assert mask[..., 1].sum() == 9
    np.testing.assert_array_equal(naive_baseline(f, [3.0]), np.ones_like(f, dtype=np.uint8))
    with pytest.raises(DimensionError):
        naive_baseline(f, [2.0, 3.0, 4.0])


def test_segment_2d_runs_requested_scheme(small_phantom, fixed_params: FlowParams) -> None:
    result = segment(small_phantom.image, fixed_params, scheme=Scheme.EXPLICIT, mode="2d")
    expected = run_explicit(small_phantom.image, fixed_params)
    np.testing.assert_array_equal(result.field, expected)
    np.testing.assert_array_equal(result.mask, finalize_mask(expected))
    assert result.stats.deltas == [2.0]
    assert result.stats.taus == [0.05]
    assert result.stats.steps == fixed_params.n_steps


def test_segment_records_energy_per_step(small_phantom, fixed_params: FlowParams) -> None:
    result = segment(small_phantom.image, fixed_params, scheme="explicit")
    steps = [record.step for record in result.stats.energies]
    assert steps == list(range(fixed_params.n_steps + 1))
    assert all(record.run == 0 for record in result.stats.energies)

    silent = segment(
        small_phantom.image, fixed_params, scheme="explicit",
        options=PipelineOptions(track_energy=False),
    )
    assert silent.stats.energies == []


def test_segment_estimates_delta_when_missing(small_phantom) -> None:
    params = FlowParams(n_steps=3)
    result = segment(small_phantom.image, params, scheme="explicit")
    expected = estimate_delta(small_phantom.image, default_brain_mask(small_phantom.image))
    assert result.stats.deltas == [pytest.approx(expected)]
    assert result.stats.taus == [pytest.approx(params.auto_tau(expected))]


def _two_brightness_volume() -> np.ndarray:
    base = make_phantom((24, 24), seed=5).image
    return np.stack([base, 0.5 * base, base], axis=-1)


def test_segment_slices_use_own_delta() -> None:
    volume = _two_brightness_volume()
    result = segment(volume, FlowParams(n_steps=2), scheme="explicit", mode=Mode.SLICES)
    deltas = result.stats.deltas
    assert len(deltas) == 3
    assert deltas[0] == pytest.approx(deltas[2])
    assert deltas[1] > deltas[0]
    assert {record.run for record in result.stats.energies} == {0, 1, 2}


def test_segment_slices_global_delta() -> None:
    volume = _two_brightness_volume()
    options = PipelineOptions(global_delta=True)
    result = segment(volume, FlowParams(n_steps=2), scheme="explicit", mode="2d", options=options)
    expected = estimate_delta(volume, default_brain_mask(volume))
    assert result.stats.deltas == [pytest.approx(expected)] * 3


def test_segment_slices_parallel_matches_sequential(fixed_params: FlowParams) -> None:
    volume = make_phantom((16, 16, 4), seed=2, sigma=0.05).image
    one = segment(volume, fixed_params, scheme="quantized", mode="2d")
    two = segment(
        volume, fixed_params, scheme="quantized", mode="2d",
        options=PipelineOptions(jobs=2),
    )
    np.testing.assert_array_equal(one.field, two.field)
    assert one.stats.steps == two.stats.steps


def test_segment_volume_single_run(fixed_params: FlowParams) -> None:
    volume = make_phantom((16, 16, 6), seed=1).image
    result = segment(volume, fixed_params, scheme="explicit", mode="3d")
    assert result.field.shape == volume.shape
    assert result.stats.deltas == [2.0]


def test_segment_rejects_bad_inputs(fixed_params: FlowParams) -> None:
    with pytest.raises(DimensionError):
        segment(np.zeros(5), fixed_params)
    with pytest.raises(DimensionError):
        segment(np.zeros((4, 4)), fixed_params, brain_mask=np.ones((4, 5)))
    with pytest.raises(ValueError):
        segment(np.zeros((4, 4)), fixed_params, scheme="implicit")
