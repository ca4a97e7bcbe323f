"""Энергии, регуляризованные потоки, коэффициенты реакции и весовое окно.

Обозначения:
    φ(s)      = (2/p)·((s² + ε²)^{p/2} − ε^p)
    k(s)      = s·(s² + ε²)^{(p−2)/2}          — поток, k = φ'/2
    k̃(s, σ)  = σ·(s² + ε²)^{(p−2)/2}          — полунеявный поток
    a         = δ²/α − λ,   b = δ/α − λ·f      — коэффициенты реакции

Соседи пикселя берутся с нулевым продолжением: смещения, выходящие за
границу поля, отбрасываются без перенормировки весов.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ParameterError
from .grid import GridField, as_field
from .models import FlowParams, WindowShape

logger = logging.getLogger(__name__)

# Допуск на нормировку и симметрию весов
_WEIGHT_ATOL = 1e-12


def phi(s: npt.ArrayLike, eps: float, p: float) -> npt.NDArray[np.float64] | float:
    """Регуляризованная энергия φ_{ε,p}(s) ≥ 0, φ(0) = 0."""
    s = np.asarray(s, dtype=np.float64)
    value = (2.0 / p) * ((s * s + eps * eps) ** (p / 2) - eps**p)
    return value if value.ndim else float(value)


def flux(s: npt.ArrayLike, eps: float, p: float) -> npt.NDArray[np.float64] | float:
    """Поток k_{ε,p}(s) = s·(s² + ε²)^{(p−2)/2}, нечётная функция."""
    s = np.asarray(s, dtype=np.float64)
    value = s * (s * s + eps * eps) ** ((p - 2) / 2)
    return value if value.ndim else float(value)


def flux_semi(
    s: npt.ArrayLike, sigma: npt.ArrayLike, eps: float, p: float
) -> npt.NDArray[np.float64] | float:
    """Полунеявный поток: модуль берётся от s, линейная часть — σ."""
    s = np.asarray(s, dtype=np.float64)
    value = np.asarray(sigma, dtype=np.float64) * (s * s + eps * eps) ** ((p - 2) / 2)
    return value if value.ndim else float(value)


def shifted_pairs(
    shape: tuple[int, ...], offset: tuple[int, ...]
) -> tuple[tuple[slice, ...], tuple[slice, ...]] | None:
    """Срезы (target, source) для пар пикселей k и k + d внутри поля.

    ``u[source]`` — соседи ``u[target]`` по смещению d. Если смещение по
    какой-либо оси не меньше размера поля, пар нет и возвращается None.
    """
    target: list[slice] = []
    source: list[slice] = []
    for n, d in zip(shape, offset):
        if abs(d) >= n:
            return None
        if d >= 0:
            target.append(slice(0, n - d))
            source.append(slice(d, n))
        else:
            target.append(slice(-d, n))
            source.append(slice(0, n + d))
    return tuple(target), tuple(source)


@dataclass(frozen=True, eq=False)
class WeightKernel:
    """Нелокальные веса w(d) на конечном наборе целочисленных смещений.

    Attributes:
        offsets: Массив смещений формы (n, dimension).
        weights: Положительные веса, по одному на смещение, сумма равна 1.
        dimension: Размерность решётки (1 для ручных примеров, 2 или 3).
    """

    offsets: npt.NDArray[np.int64]
    weights: npt.NDArray[np.float64]
    dimension: int

    def __post_init__(self) -> None:
        if not 1 <= self.dimension <= 3:
            raise DimensionError(f"недопустимая размерность окна: {self.dimension}")
        offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, self.dimension)
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if offsets.shape[0] != weights.size or weights.size == 0:
            raise ParameterError("число весов должно совпадать с числом смещений")
        if np.any(weights <= 0):
            raise ParameterError("нарушено ограничение: w(d) > 0")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ParameterError(f"нарушено ограничение: сумма весов = 1 (получено {weights.sum():.12g})")

        lookup = {tuple(d): w for d, w in zip(offsets.tolist(), weights.tolist())}
        if len(lookup) != weights.size:
            raise ParameterError("смещения окна повторяются")
        for d, w in lookup.items():
            mirrored = lookup.get(tuple(-c for c in d))
            if mirrored is None or abs(mirrored - w) > _WEIGHT_ATOL:
                raise ParameterError(f"нарушено ограничение: w(d) = w(-d) для d = {d}")

        offsets.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.weights.size)

    @cached_property
    def radius(self) -> int:
        """Наибольшее |d_i| по всем смещениям и осям."""
        return int(np.abs(self.offsets).max())

    @cached_property
    def window(self) -> npt.NDArray[np.float64]:
        """Плотное окно (2R+1)^dimension, нули вне носителя, центр — смещение 0."""
        size = 2 * self.radius + 1
        dense = np.zeros((size,) * self.dimension, dtype=np.float64)
        dense[tuple((self.offsets + self.radius).T)] = self.weights
        dense.setflags(write=False)
        return dense

    def pairs(self, shape: tuple[int, ...]):
        """Итерирует (вес, target, source) для всех смещений, попадающих в поле."""
        if len(shape) != self.dimension:
            raise DimensionError(
                f"окно размерности {self.dimension} не подходит полю формы {shape}"
            )
        for offset, weight in zip(self.offsets.tolist(), self.weights.tolist()):
            slices = shifted_pairs(shape, tuple(offset))
            if slices is not None:
                yield weight, slices[0], slices[1]


def gaussian_weights(
    rho: float,
    dimension: int,
    shape: WindowShape | str = WindowShape.BALL,
) -> WeightKernel:
    """Гауссово окно w(d) ∝ exp(−|d|²/ρ²) с носителем |d| < 2ρ.

    Args:
        rho: Радиус ядра ρ > 0 в пикселях.
        dimension: Размерность решётки (2 или 3; 1 — для тестовых полей).
        shape: ``ball`` — евклидов шар |d| < 2ρ, ``square`` — куб max|d_i| < 2ρ.

    Returns:
        Нормированное симметричное WeightKernel, включающее смещение 0.
    """
    if rho <= 0:
        raise ParameterError("нарушено ограничение: rho > 0")
    shape = WindowShape(shape)
    reach = 2.0 * rho
    radius = math.ceil(reach) - 1

    axis = range(-radius, radius + 1)
    offsets = np.array(list(product(axis, repeat=dimension)), dtype=np.int64)
    squared = np.sum(offsets * offsets, axis=1).astype(np.float64)
    if shape is WindowShape.BALL:
        keep = squared < reach * reach
        offsets, squared = offsets[keep], squared[keep]

    weights = np.exp(-squared / (rho * rho))
    return WeightKernel(offsets, weights / weights.sum(), dimension)


@dataclass(frozen=True, eq=False)
class ReactionField:
    """Коэффициенты реакции: скаляр a и поле b."""

    a: float
    b: GridField


def reaction_coefficients(params: FlowParams, f: npt.ArrayLike) -> ReactionField:
    """Вычисляет a = δ²/α − λ и b = δ/α − λ·f.

    Raises:
        ParameterError: если δ не задан или a ≤ 0.
    """
    f = as_field(f)
    a = params.reaction_a
    if a <= 0:
        raise ParameterError(f"нарушено ограничение: delta^2/alpha - lambda > 0 (получено a = {a:.6g})")
    b = params.delta / params.alpha - params.lam * f
    if np.any(b < 0):
        logger.warning(
            "Коэффициент реакции b принимает отрицательные значения (min %.4g): "
            "delta/alpha < lambda",
            float(b.min()),
        )
    return ReactionField(a=a, b=b)


def saliency_energy(u: npt.ArrayLike, delta: float) -> float:
    """H(u) = Σ −½(1 − δu)² ≤ 0."""
    u = np.asarray(u, dtype=np.float64)
    return float(-0.5 * np.sum((1.0 - delta * u) ** 2))


def nonlocal_energy(u: npt.ArrayLike, w: WeightKernel, eps: float, p: float) -> float:
    """J(u) = ¼ Σ_k Σ_d w(d)·φ(u[k+d] − u[k]) по парам внутри поля."""
    u = as_field(u)
    total = 0.0
    for weight, target, source in w.pairs(u.shape):
        total += weight * float(np.sum(phi(u[source] - u[target], eps, p)))
    return 0.25 * total


def fidelity_energy(u: npt.ArrayLike, f: npt.ArrayLike) -> float:
    """F(u) = ½ Σ (u − f)²."""
    diff = np.asarray(u, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    return float(0.5 * np.sum(diff * diff))


def total_energy(
    u: npt.ArrayLike, f: npt.ArrayLike, w: WeightKernel, params: FlowParams
) -> tuple[float, float, float, float]:
    """Полная энергия модели α·J + λ·F + H/α.

    Returns:
        Кортеж (J, H, F, полная энергия).
    """
    j = nonlocal_energy(u, w, params.epsilon, params.p)
    h = saliency_energy(u, params.delta)
    fid = fidelity_energy(u, f)
    return j, h, fid, params.alpha * j + params.lam * fid + h / params.alpha
