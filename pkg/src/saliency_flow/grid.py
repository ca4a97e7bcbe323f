"""Плотные 2D/3D поля, нормализация, квантование и нормы.

Поле хранится как ``numpy.ndarray`` float64 в C-порядке с осями (L, M[, S]).
Все операции возвращают новые массивы и не меняют входные.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt

from .errors import (
    ContractError,
    DegenerateReferenceError,
    DimensionError,
    InputRangeError,
    ParameterError,
)

GridField = npt.NDArray[np.float64]
SegmentationMask = npt.NDArray[np.uint8]


def as_field(array: npt.ArrayLike) -> GridField:
    """Приводит массив к float64-полю и проверяет размерность (1..3 оси).

    Одномерные поля допускаются для ручных примеров и тестов.
    """
    field = np.ascontiguousarray(array, dtype=np.float64)
    if not 1 <= field.ndim <= 3 or field.size == 0:
        raise DimensionError(f"ожидалось непустое поле с 1-3 осями, получена форма {field.shape}")
    return field


def normalize_input(raw: npt.ArrayLike, max_code: int) -> GridField:
    """Переводит целочисленные коды [0, max_code] в значения [0, 1].

    Args:
        raw: Целочисленное поле кодов (например, отсчёты PGM).
        max_code: Максимальный код (maxval), больше нуля.

    Returns:
        Поле raw / max_code.
    """
    if max_code <= 0:
        raise ParameterError("нарушено ограничение: max_code > 0")
    codes = np.asarray(raw)
    if codes.dtype.kind not in "iub":
        if not np.all(np.isfinite(codes)) or np.any(codes != np.round(codes)):
            raise InputRangeError("ожидались целочисленные коды")
    if codes.size and (codes.min() < 0 or codes.max() > max_code):
        raise InputRangeError(
            f"коды вне диапазона [0, {max_code}]: min={codes.min()}, max={codes.max()}"
        )
    return as_field(codes) / max_code


@dataclass(frozen=True, eq=False)
class QuantizationPartition:
    """Разбиение [0, 1] на уровни 0 = q_1 < ... < q_Q = 1."""

    levels: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        levels = np.asarray(self.levels, dtype=np.float64)
        if levels.ndim != 1 or levels.size < 2:
            raise ParameterError("нарушено ограничение: Q >= 2")
        if levels[0] != 0.0 or levels[-1] != 1.0:
            raise ParameterError("нарушено ограничение: q_1 = 0 и q_Q = 1")
        if np.any(np.diff(levels) <= 0):
            raise ParameterError("уровни квантования должны строго возрастать")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @property
    def Q(self) -> int:
        return int(self.levels.size)

    @cached_property
    def gap(self) -> float:
        """Наибольший промежуток между соседними уровнями."""
        return float(np.max(np.diff(self.levels)))

    def level_index(self, v: GridField) -> npt.NDArray[np.intp]:
        """Индекс уровня каждого пикселя поля, лежащего на разбиении.

        Raises:
            ContractError: если хотя бы одно значение не совпадает с уровнем.
        """
        idx = np.searchsorted(self.levels, v)
        idx = np.clip(idx, 0, self.Q - 1)
        if not np.array_equal(self.levels[idx], v):
            off = int(np.count_nonzero(self.levels[idx] != v))
            raise ContractError(f"поле не лежит на разбиении: {off} значений вне уровней")
        return idx


def make_partition(Q: int) -> QuantizationPartition:
    """Равномерное разбиение q_i = (i - 1)/(Q - 1)."""
    if Q < 2:
        raise ParameterError("нарушено ограничение: Q >= 2")
    return QuantizationPartition(np.arange(Q, dtype=np.float64) / (Q - 1))


def round_to_partition(v: npt.ArrayLike, q: QuantizationPartition) -> GridField:
    """Округляет каждое значение к ближайшему уровню разбиения.

    При равном расстоянии выбирается уровень с меньшим индексом; значения вне
    [0, 1] уходят на крайние уровни.
    """
    values = np.asarray(v, dtype=np.float64)
    levels = q.levels
    upper = np.clip(np.searchsorted(levels, values, side="left"), 1, q.Q - 1)
    lower = upper - 1
    d_low = np.abs(values - levels[lower])
    d_up = np.abs(levels[upper] - values)
    return levels[np.where(d_up < d_low, upper, lower)]


def clamp01(v: npt.ArrayLike) -> GridField:
    """Поточечно min(1, max(0, v))."""
    return np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)


def relative_difference(u: npt.ArrayLike, ref: npt.ArrayLike) -> float:
    """Относительная разница ||u - ref||_2 / ||ref||_2."""
    u = np.asarray(u, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if u.shape != ref.shape:
        raise DimensionError(f"формы не совпадают: {u.shape} и {ref.shape}")
    norm = float(np.linalg.norm(ref.ravel()))
    if norm == 0.0:
        raise DegenerateReferenceError("эталонное поле имеет нулевую норму")
    return float(np.linalg.norm((u - ref).ravel())) / norm


def violation_norms(u: npt.ArrayLike) -> tuple[float, float]:
    """Нормы нарушения ограничения 0 <= u <= 1: (||u^-||_inf, ||(u-1)^+||_inf)."""
    u = np.asarray(u, dtype=np.float64)
    negative = float(np.max(np.maximum(-u, 0.0), initial=0.0))
    above_one = float(np.max(np.maximum(u - 1.0, 0.0), initial=0.0))
    return negative, above_one


def same_shape(*fields: npt.NDArray) -> None:
    """Проверяет, что все поля одной формы."""
    shapes = {f.shape for f in fields}
    if len(shapes) > 1:
        raise DimensionError(f"формы полей не совпадают: {sorted(shapes)}")
