import math

import numpy as np
import pytest

from saliency_flow.errors import (
    ContractError,
    DegenerateReferenceError,
    DimensionError,
    InputRangeError,
    ParameterError,
)
from saliency_flow.grid import (
    QuantizationPartition,
    as_field,
    clamp01,
    make_partition,
    normalize_input,
    relative_difference,
    round_to_partition,
    violation_norms,
)


def test_normalize_input_divides_by_max_code() -> None:
    np.testing.assert_array_equal(normalize_input(np.zeros((2, 2), dtype=np.uint8), 255), np.zeros((2, 2)))
    np.testing.assert_array_equal(normalize_input(np.full((2, 2), 255), 255), np.ones((2, 2)))
    np.testing.assert_allclose(normalize_input([0, 51, 255], 255), [0.0, 0.2, 1.0])


def test_normalize_input_rejects_codes_out_of_range() -> None:
    with pytest.raises(InputRangeError):
        normalize_input([0, 256], 255)
    with pytest.raises(InputRangeError):
        normalize_input([-1, 3], 255)
    with pytest.raises(InputRangeError):
        normalize_input([0.5, 1.0], 255)
    with pytest.raises(ParameterError):
        normalize_input([0, 1], 0)


def test_as_field_rejects_empty_and_4d() -> None:
    with pytest.raises(DimensionError):
        as_field(np.zeros((0, 3)))
    with pytest.raises(DimensionError):
        as_field(np.zeros((2, 2, 2, 2)))


def test_make_partition_uniform_levels() -> None:
    np.testing.assert_array_equal(make_partition(2).levels, [0.0, 1.0])
    np.testing.assert_array_equal(make_partition(3).levels, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(make_partition(5).levels, [0.0, 0.25, 0.5, 0.75, 1.0])
    q = make_partition(257)
    assert np.all(np.diff(q.levels) > 0)
    np.testing.assert_allclose(np.diff(q.levels), 1 / 256, rtol=0, atol=1e-15)
    assert q.gap == pytest.approx(1 / 256)


def test_make_partition_rejects_single_level() -> None:
    with pytest.raises(ParameterError):
        make_partition(1)


def test_partition_requires_endpoints_and_order() -> None:
    with pytest.raises(ParameterError):
        QuantizationPartition(np.array([0.1, 1.0]))
    with pytest.raises(ParameterError):
        QuantizationPartition(np.array([0.0, 0.6, 0.4, 1.0]))


def test_round_to_partition_examples() -> None:
    q = make_partition(5)
    assert round_to_partition([0.26], q)[0] == 0.25
    assert round_to_partition([1.7], q)[0] == 1.0
    assert round_to_partition([-3.0], q)[0] == 0.0
    np.testing.assert_array_equal(round_to_partition(q.levels, q), q.levels)


def test_round_to_partition_tie_goes_to_lower_level() -> None:
    q = make_partition(5)
    assert round_to_partition([0.125], q)[0] == 0.0
    assert round_to_partition([0.375], q)[0] == 0.25


def test_round_to_partition_nonuniform_levels() -> None:
    q = QuantizationPartition(np.array([0.0, 0.1, 0.7, 1.0]))
    np.testing.assert_array_equal(round_to_partition([0.05, 0.3, 0.41, 0.9], q), [0.0, 0.1, 0.7, 1.0])


def test_round_to_partition_idempotent(rng: np.random.Generator) -> None:
    q = make_partition(17)
    v = rng.uniform(-0.5, 1.5, size=(20, 20))
    once = round_to_partition(v, q)
    np.testing.assert_array_equal(round_to_partition(once, q), once)
    assert set(np.unique(once)) <= set(q.levels.tolist())


def test_level_index_rejects_off_partition_values() -> None:
    q = make_partition(5)
    np.testing.assert_array_equal(q.level_index(np.array([0.0, 0.5, 1.0])), [0, 2, 4])
    with pytest.raises(ContractError):
        q.level_index(np.array([0.0, 0.3]))


def test_clamp01() -> None:
    np.testing.assert_array_equal(clamp01([-1.0, 0.5, 2.0]), [0.0, 0.5, 1.0])
    v = np.array([0.0, 0.3, 1.0])
    np.testing.assert_array_equal(clamp01(v), v)
    np.testing.assert_array_equal(clamp01(clamp01([-0.3, 4.0])), [0.0, 1.0])


def test_relative_difference_examples() -> None:
    ref = np.array([[0.2, 0.4], [0.6, 0.8]])
    assert relative_difference(ref, ref) == 0.0
    assert relative_difference(2 * ref, ref) == pytest.approx(1.0)
    assert relative_difference([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.sqrt(2))


def test_relative_difference_errors() -> None:
    with pytest.raises(DegenerateReferenceError):
        relative_difference([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(DimensionError):
        relative_difference([1.0, 2.0], [1.0, 2.0, 3.0])


def test_violation_norms() -> None:
    assert violation_norms([-0.2, 0.5, 1.3]) == pytest.approx((0.2, 0.3))
    assert violation_norms([0.0, 1.0]) == (0.0, 0.0)
