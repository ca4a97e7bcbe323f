import math

import numpy as np
import pytest

from saliency_flow.errors import DimensionError, ParameterError
from saliency_flow.kernels import (
    ReactionField,
    WeightKernel,
    fidelity_energy,
    flux,
    flux_semi,
    gaussian_weights,
    nonlocal_energy,
    phi,
    reaction_coefficients,
    saliency_energy,
    total_energy,
)
from saliency_flow.models import FlowParams, WindowShape
from saliency_flow.solver_explicit import explicit_step


def three_tap() -> WeightKernel:
    return WeightKernel(np.array([[-1], [0], [1]]), np.array([0.25, 0.5, 0.25]), 1)


def test_phi_examples() -> None:
    assert phi(0.0, 0.3, 0.5) == 0.0
    assert phi(0.7, 0.01, 2.0) == pytest.approx(0.49)
    assert phi(3.0, 4.0, 1.0) == pytest.approx(2.0)
    s = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(phi(s, 0.1, 0.5), phi(-s, 0.1, 0.5))
    assert np.all(phi(s, 0.1, 0.5) >= 0)


def test_flux_examples() -> None:
    assert flux(0.0, 0.2, 0.5) == 0.0
    assert flux(0.37, 0.2, 2.0) == pytest.approx(0.37)
    assert flux(3.0, 4.0, 1.0) == pytest.approx(0.6)


def test_flux_semi_examples() -> None:
    assert flux_semi(0.4, 0.0, 0.1, 0.5) == 0.0
    assert flux_semi(0.4, 0.4, 0.1, 0.5) == pytest.approx(flux(0.4, 0.1, 0.5))
    assert flux_semi(3.0, 10.0, 4.0, 1.0) == pytest.approx(2.0)


def test_scalar_inputs_return_float() -> None:
    assert isinstance(phi(1.0, 0.1, 1.0), float)
    assert isinstance(flux(1.0, 0.1, 1.0), float)
    assert isinstance(flux(np.array([1.0]), 0.1, 1.0), np.ndarray)


def test_flux_is_odd_and_half_derivative_of_phi() -> None:
    s = np.arange(-10, 11, dtype=np.float64)
    for p in (0.3, 0.5, 1.0, 1.5, 2.0):
        np.testing.assert_allclose(flux(-s, 0.5, p), -flux(s, 0.5, p), rtol=0, atol=0)
        h = 1e-6
        fd = (phi(s + h, 0.5, p) - phi(s - h, 0.5, p)) / (2 * h)
        nonzero = s != 0
        np.testing.assert_allclose(fd[nonzero], 2 * flux(s, 0.5, p)[nonzero], rtol=1e-5)


def test_flux_monotonicity_depends_on_p() -> None:
    s = np.linspace(0, 3, 301)
    assert np.all(np.diff(flux(s, 0.1, 1.5)) > 0)
    values = flux(s, 0.1, 0.5)
    peak = 0.1 / math.sqrt(1 - 0.5)
    rising = s < peak - 0.01
    falling = s > peak + 0.01
    assert np.all(np.diff(values[rising]) > 0)
    assert np.all(np.diff(values[falling]) < 0)


def test_reaction_coefficients_examples() -> None:
    rx = reaction_coefficients(FlowParams(alpha=1.0, delta=1.0, lam=0.0), np.zeros((2, 2)))
    assert rx.a == pytest.approx(1.0)
    np.testing.assert_allclose(rx.b, 1.0)

    rx = reaction_coefficients(FlowParams(alpha=1.0, delta=2.0, lam=1.0), np.full((2, 2), 0.5))
    assert rx.a == pytest.approx(3.0)
    np.testing.assert_allclose(rx.b, 1.5)


def test_reaction_coefficients_reject_nonpositive_a() -> None:
    with pytest.raises(ParameterError, match=r"delta\^2/alpha - lambda > 0"):
        FlowParams(alpha=1.0, delta=1.0, lam=1.0)


def test_reaction_coefficients_warn_on_negative_b(caplog: pytest.LogCaptureFixture) -> None:
    params = FlowParams(alpha=1.0, delta=2.0, lam=3.0, tau=0.1)
    with caplog.at_level("WARNING"):
        rx = reaction_coefficients(params, np.ones((2, 2)))
    assert np.all(rx.b < 0)
    assert "отрицательные" in caplog.text


def test_gaussian_weights_rho_one_is_full_3x3() -> None:
    w = gaussian_weights(1.0, 2)
    assert len(w) == 9
    assert w.weights.sum() == pytest.approx(1.0, abs=1e-12)
    center = w.weights[np.all(w.offsets == 0, axis=1)][0]
    for d, weight in zip(w.offsets, w.weights):
        assert weight / center == pytest.approx(math.exp(-float(d @ d)))


def test_gaussian_weights_support_and_symmetry() -> None:
    for rho, dim in ((1.5, 2), (2.0, 2), (1.2, 3)):
        w = gaussian_weights(rho, dim)
        norms = np.sqrt(np.sum(w.offsets**2, axis=1))
        assert np.all(norms < 2 * rho)
        lookup = {tuple(d): x for d, x in zip(w.offsets.tolist(), w.weights.tolist())}
        assert all(lookup[tuple(-c for c in d)] == x for d, x in lookup.items())
        assert w.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_gaussian_weights_square_window_keeps_corners() -> None:
    ball = gaussian_weights(2.0, 2, WindowShape.BALL)
    square = gaussian_weights(2.0, 2, WindowShape.SQUARE)
    assert len(square) == 49
    assert len(ball) < len(square)


def test_weight_kernel_validation() -> None:
    with pytest.raises(ParameterError):
        WeightKernel(np.array([[-1], [0], [1]]), np.array([0.2, 0.5, 0.3]), 1)
    with pytest.raises(ParameterError):
        WeightKernel(np.array([[0], [1]]), np.array([0.5, 0.5]), 1)
    with pytest.raises(DimensionError):
        WeightKernel(np.zeros((1, 4)), np.array([1.0]), 4)


def test_weight_kernel_window_is_dense() -> None:
    np.testing.assert_allclose(three_tap().window, [0.25, 0.5, 0.25])
    assert three_tap().radius == 1


def test_saliency_energy_examples() -> None:
    assert saliency_energy(np.full((3, 3), 0.5), 2.0) == 0.0
    assert saliency_energy(np.zeros((4, 5)), 3.0) == pytest.approx(-10.0)
    assert saliency_energy([0.0, 1.0], 1.0) == pytest.approx(-0.5)
    assert saliency_energy(np.linspace(0, 1, 10), 2.5) <= 0


def test_nonlocal_energy_examples() -> None:
    w = WeightKernel(np.array([[-1], [1]]), np.array([0.5, 0.5]), 1)
    # пары (0→1) и (1→0): 2 · ½ · φ(1) / 4
    expected = 0.25 * (0.5 * phi(1.0, 4.0, 1.0) + 0.5 * phi(-1.0, 4.0, 1.0))
    assert nonlocal_energy([0.0, 1.0], w, 4.0, 1.0) == pytest.approx(expected)
    assert nonlocal_energy(np.full((5, 5), 0.3), gaussian_weights(1.5, 2), 0.1, 0.5) == 0.0


def test_nonlocal_energy_shift_invariant(rng: np.random.Generator) -> None:
    u = rng.uniform(size=(12, 12))
    w = gaussian_weights(1.5, 2)
    assert nonlocal_energy(u + 0.37, w, 0.1, 0.8) == pytest.approx(nonlocal_energy(u, w, 0.1, 0.8))


def test_nonlocal_energy_decreases_along_pure_diffusion(rng: np.random.Generator) -> None:
    w = gaussian_weights(1.5, 2)
    for p in (1.0, 1.5, 2.0):
        params = FlowParams(p=p, epsilon=0.1, alpha=1.0, delta=1.0, tau=0.01)
        u = rng.uniform(size=(16, 16))
        pure = ReactionField(a=0.0, b=np.zeros_like(u))
        before = nonlocal_energy(u, w, params.epsilon, p)
        for _ in range(5):
            u = explicit_step(u, pure, w, params, truncate=False)
            after = nonlocal_energy(u, w, params.epsilon, p)
            assert after <= before + 1e-12
            before = after


def test_total_energy_combines_terms() -> None:
    params = FlowParams(alpha=0.5, lam=0.2, delta=1.5)
    w = gaussian_weights(1.0, 2)
    u = np.array([[0.0, 1.0], [1.0, 0.5]])
    f = np.full((2, 2), 0.4)
    j, h, fid, total = total_energy(u, f, w, params)
    assert fid == pytest.approx(fidelity_energy(u, f))
    assert total == pytest.approx(0.5 * j + 0.2 * fid + h / 0.5)
