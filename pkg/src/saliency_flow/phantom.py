"""Синтетические фантомы с эталонной разметкой.

Генератор псевдослучайных чисел — SplitMix64 в счётном режиме: значение
номер i потока s равно mix(x_s + (i + 1)·γ), где x_s = seed + s·2^32,
γ = 0x9E3779B97F4A7C15. Это позволяет получить те же фантомы в любой
реализации, зная seed (алгоритм описан в docs/PHANTOM.md).

Потоки: 0 — геометрия пятен, 1 и 2 — равномерные величины для Box–Muller.
"""

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ParameterError
from .grid import GridField, SegmentationMask

GENERATOR_NAME = "splitmix64-counter"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM_STRIDE = 1 << 32

STREAM_GEOMETRY = 0
STREAM_NOISE_RADIUS = 1
STREAM_NOISE_ANGLE = 2


def splitmix64(seed: int, stream: int, count: int, start: int = 0) -> npt.NDArray[np.uint64]:
    """Значения start..start+count−1 потока ``stream`` генератора SplitMix64."""
    if seed < 0:
        raise ParameterError("нарушено ограничение: seed >= 0")
    state = np.uint64((seed + stream * _STREAM_STRIDE) % (1 << 64))
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state + counters * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def uniform(seed: int, stream: int, count: int, start: int = 0) -> npt.NDArray[np.float64]:
    """Равномерные величины в [0, 1): старшие 53 бита, умноженные на 2^-53."""
    bits = splitmix64(seed, stream, count, start) >> np.uint64(11)
    return bits.astype(np.float64) * 2.0**-53


def normal(seed: int, count: int) -> npt.NDArray[np.float64]:
    """Стандартные нормальные величины (Box–Muller, косинусная ветвь)."""
    u1 = uniform(seed, STREAM_NOISE_RADIUS, count)
    u2 = uniform(seed, STREAM_NOISE_ANGLE, count)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class Blob:
    """Круглое пятно: центр (строка, столбец) и радиус в пикселях."""

    row: float
    col: float
    radius: float


@dataclass
class Phantom:
    """Фантом: изображение (или объём), эталонная маска и параметры генерации."""

    image: GridField
    truth: SegmentationMask
    seed: int
    blobs: list[Blob] = field(default_factory=list)
    generator: str = GENERATOR_NAME

    def describe(self) -> dict[str, object]:
        return {
            "seed": self.seed,
            "generator": self.generator,
            "shape": list(self.image.shape),
            "blobs": [vars(b) for b in self.blobs],
        }


def _place_blobs(rows: int, cols: int, count: int, seed: int) -> list[Blob]:
    """Пятна по потоку 0: на пятно k — величины 3k (радиус), 3k+1 (строка), 3k+2 (столбец)."""
    u = uniform(seed, STREAM_GEOMETRY, 3 * count)
    side = min(rows, cols)
    r_min, r_max = side / 12.0, side / 6.0
    blobs = []
    for k in range(count):
        radius = r_min + u[3 * k] * (r_max - r_min)
        row = radius + u[3 * k + 1] * (rows - 1 - 2 * radius)
        col = radius + u[3 * k + 2] * (cols - 1 - 2 * radius)
        blobs.append(Blob(row=float(row), col=float(col), radius=float(radius)))
    return blobs


def _disc_mask(rows: int, cols: int, blobs: list[Blob]) -> npt.NDArray[np.bool_]:
    ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    mask = np.zeros((rows, cols), dtype=bool)
    for b in blobs:
        mask |= (ii - b.row) ** 2 + (jj - b.col) ** 2 <= b.radius**2
    return mask


def axial_span(slices: int, fraction: float) -> slice:
    """Центральный диапазон срезов, занимающий долю ``fraction`` объёма."""
    length = max(1, round(slices * fraction))
    start = (slices - length) // 2
    return slice(start, start + length)


def make_phantom(
    shape: tuple[int, ...],
    *,
    blobs: int = 2,
    foreground: float = 0.8,
    background: float = 0.3,
    sigma: float = 0.0,
    seed: int = 0,
    axial_fraction: float = 0.5,
) -> Phantom:
    """Генерирует фантом: круглые пятна на фоне с аддитивным гауссовым шумом.

    Args:
        shape: (L, M) для изображения или (L, M, S) для объёма.
        blobs: Число пятен.
        foreground: Яркость пятен.
        background: Яркость фона.
        sigma: СКО шума.
        seed: Зерно генератора.
        axial_fraction: Доля срезов объёма, через которые проходят пятна
            (одинаковый круг в каждом срезе).

    Returns:
        Phantom с изображением, обрезанным в [0, 1], и эталонной маской.
    """
    if len(shape) not in (2, 3) or min(shape) <= 0:
        raise DimensionError(f"фантом должен быть 2D или 3D, получена форма {shape}")
    if blobs < 0 or sigma < 0:
        raise ParameterError("нарушено ограничение: blobs >= 0, sigma >= 0")
    if not 0 <= background <= 1 or not 0 <= foreground <= 1:
        raise ParameterError("яркости фона и пятен должны лежать в [0, 1]")
    if not 0 < axial_fraction <= 1:
        raise ParameterError("нарушено ограничение: 0 < axial_fraction <= 1")

    rows, cols = shape[0], shape[1]
    placed = _place_blobs(rows, cols, blobs, seed)
    disc = _disc_mask(rows, cols, placed)

    if len(shape) == 2:
        truth = disc
    else:
        truth = np.zeros(shape, dtype=bool)
        truth[..., axial_span(shape[2], axial_fraction)] = disc[..., np.newaxis]

    image = np.where(truth, foreground, background).astype(np.float64)
    if sigma > 0:
        image = image + sigma * normal(seed, image.size).reshape(shape)
    return Phantom(
        image=np.clip(image, 0.0, 1.0),
        truth=truth.astype(np.uint8),
        seed=seed,
        blobs=placed,
    )


def phantom_suite(
    count: int = 10,
    shape: tuple[int, ...] = (64, 64),
    *,
    sigma: float = 0.0,
    first_seed: int = 0,
    blobs: int = 2,
) -> list[Phantom]:
    """Набор фантомов с зёрнами first_seed..first_seed+count−1."""
    return [
        make_phantom(shape, blobs=blobs, sigma=sigma, seed=first_seed + i)
        for i in range(count)
    ]
