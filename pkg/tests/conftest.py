"""Общие фикстуры тестов."""

import numpy as np
import pytest

from saliency_flow.models import FlowParams
from saliency_flow.phantom import Phantom, make_phantom, phantom_suite


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def small_phantom() -> Phantom:
    """Фантом 32×32 без шума, два пятна."""
    return make_phantom((32, 32), seed=3)


@pytest.fixture
def fixed_params() -> FlowParams:
    """Параметры с заданными δ и τ для быстрых прогонов."""
    return FlowParams(p=1.0, epsilon=0.1, alpha=1.0, delta=2.0, tau=0.05, n_steps=5, rho=1.0)


@pytest.fixture(scope="session")
def clean_suite() -> list[Phantom]:
    """10 фантомов 64×64 без шума (зёрна 0..9)."""
    return phantom_suite(10, (64, 64))


@pytest.fixture(scope="session")
def noisy_suite() -> list[Phantom]:
    """10 фантомов 64×64 с шумом σ = 0.05."""
    return phantom_suite(10, (64, 64), sigma=0.05)


def on_partition_field(rng: np.random.Generator, shape: tuple[int, ...], q_levels: int) -> np.ndarray:
    """Случайное поле, лежащее на равномерном разбиении из q_levels уровней."""
    return rng.integers(0, q_levels, size=shape).astype(np.float64) / (q_levels - 1)
