"""Конвейер сегментации: оценка δ, выбор схемы, режимы 2D/3D, финальная маска.

Поддерживает:
- Автоматическую оценку δ по средней яркости мозга (линейная регрессия)
- Обработку объёма целиком (3d) или по срезам вдоль последней оси (2d)
- Параллельную обработку срезов (multiprocessing)
- Учёт энергии модели на каждом шаге
"""

import logging
import signal
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, InputRangeError, ParameterError
from .grid import GridField, SegmentationMask, as_field, violation_norms
from .kernels import gaussian_weights, total_energy
from .models import (
    EnergyRecord,
    FlowParams,
    Mode,
    PipelineOptions,
    RunStats,
    Scheme,
    SegmentationResult,
)
from .solver_explicit import run_explicit
from .solver_quantized import run_quantized
from .solver_yosida import run_yosida

logger = logging.getLogger(__name__)

REGRESSION_SLOPE = 1.176
REGRESSION_INTERCEPT = 0.101


def estimate_delta(
    f: npt.ArrayLike,
    brain_mask: npt.ArrayLike,
    *,
    slope: float = REGRESSION_SLOPE,
    intercept: float = REGRESSION_INTERCEPT,
) -> float:
    """Оценивает δ по средней яркости мозга.

    Средняя яркость опухоли предсказывается регрессией
    μ_tumor ≈ slope·μ_brain + intercept, порог 1/δ ставится посередине:
    δ = 2 / ((1 + slope)·μ_brain + intercept).

    Args:
        f: Нормализованное поле.
        brain_mask: Маска пикселей мозга.
        slope: Наклон регрессии.
        intercept: Свободный член регрессии.

    Returns:
        Значение δ > 0.

    Raises:
        InputRangeError: если маска пуста.
        ParameterError: если знаменатель не положителен.
    """
    f = np.asarray(f, dtype=np.float64)
    mask = np.asarray(brain_mask).astype(bool)
    if mask.shape != f.shape:
        raise DimensionError(f"маска {mask.shape} не совпадает с полем {f.shape}")
    if not mask.any():
        raise InputRangeError("маска мозга пуста: оценить delta невозможно")

    mu_brain = float(f[mask].mean())
    denominator = (1.0 + slope) * mu_brain + intercept
    if denominator <= 0:
        raise ParameterError(
            f"нарушено ограничение: (1 + slope)*mu_brain + intercept > 0 (получено {denominator:.6g})"
        )
    return 2.0 / denominator


def default_brain_mask(f: npt.ArrayLike) -> SegmentationMask:
    """Маска мозга по умолчанию: все пиксели с f > 0."""
    return (np.asarray(f) > 0).astype(np.uint8)


def naive_threshold(
    f: npt.ArrayLike, delta: float, brain_mask: npt.ArrayLike | None = None
) -> SegmentationMask:
    """Базовая сегментация: f > 1/δ (внутри маски мозга, если она задана)."""
    if delta <= 0:
        raise ParameterError("нарушено ограничение: delta > 0")
    mask = np.asarray(f) > 1.0 / delta
    if brain_mask is not None:
        mask &= np.asarray(brain_mask).astype(bool)
    return mask.astype(np.uint8)


def naive_baseline(
    f: npt.ArrayLike, deltas: Sequence[float], brain_mask: npt.ArrayLike | None = None
) -> SegmentationMask:
    """Наивный порог с δ прогона: один δ на всё поле или по δ на каждый срез."""
    if len(deltas) == 1:
        return naive_threshold(f, deltas[0], brain_mask)
    f = np.asarray(f)
    if len(deltas) != f.shape[-1]:
        raise DimensionError(f"получено {len(deltas)} значений delta на {f.shape[-1]} срезов")
    brain = np.ones(f.shape, dtype=bool) if brain_mask is None else np.asarray(brain_mask)
    return np.stack(
        [naive_threshold(f[..., s], d, brain[..., s]) for s, d in enumerate(deltas)],
        axis=-1,
    )


def finalize_mask(u: npt.ArrayLike) -> SegmentationMask:
    """Финальная маска: u ≥ 0.5."""
    return (np.asarray(u) >= 0.5).astype(np.uint8)


@dataclass
class _RunOutcome:
    """Результат одного прогона решателя (весь объём или один срез)."""

    solution: GridField
    steps: int = 0
    inner_iterations: int = 0
    seconds: float = 0.0
    energies: list[EnergyRecord] = field(default_factory=list)


def _solve_one(
    f: GridField,
    params: FlowParams,
    scheme: Scheme,
    track_energy: bool,
    run_index: int,
) -> _RunOutcome:
    """Один прогон схемы. Функция уровня модуля — запускается в ProcessPoolExecutor.

    Args:
        f: Поле (срез или объём).
        params: Параметры с зафиксированными δ и τ.
        scheme: Численная схема.
        track_energy: Считать ли энергию на каждом шаге.
        run_index: Номер прогона (для записей энергии).

    Returns:
        _RunOutcome с полем u^N и счётчиками.
    """
    w = gaussian_weights(params.rho, f.ndim, params.window)
    outcome = _RunOutcome(solution=f)

    def _record(step: int, u: GridField) -> None:
        j, h, fid, total = total_energy(u, f, w, params)
        outcome.energies.append(EnergyRecord(run_index, step, j, h, fid, total))

    def _monitor(step: int, u: GridField) -> None:
        outcome.steps = step
        if track_energy:
            _record(step, u)

    def _count_inner(n: int, j: int, r: float, u: GridField) -> None:
        outcome.inner_iterations += 1

    if track_energy:
        _record(0, f)

    start = time.perf_counter()
    if scheme is Scheme.EXPLICIT:
        u = run_explicit(f, params, weights=w, monitor=_monitor)
    elif scheme is Scheme.QUANTIZED:
        u = run_quantized(f, params, weights=w, monitor=_monitor)
    else:
        u = run_yosida(f, params, weights=w, monitor=_monitor, on_inner=_count_inner)
    outcome.seconds = time.perf_counter() - start
    outcome.solution = u
    return outcome


def _resolve_delta(
    f: GridField, brain: npt.NDArray[np.bool_], params: FlowParams, options: PipelineOptions
) -> float:
    if params.delta is not None:
        return params.delta
    return estimate_delta(
        f,
        brain,
        slope=options.regression_slope,
        intercept=options.regression_intercept,
    )


def segment(
    f: npt.ArrayLike,
    params: FlowParams,
    scheme: Scheme | str | None = None,
    mode: Mode | str | None = None,
    *,
    options: PipelineOptions | None = None,
    brain_mask: npt.ArrayLike | None = None,
) -> SegmentationResult:
    """Сегментирует изображение или объём.

    Args:
        f: Нормализованное 2D- или 3D-поле.
        params: Параметры модели; delta=None — оценка по изображению.
        scheme: Схема (перекрывает options.scheme).
        mode: Режим 2d/3d (перекрывает options.mode).
        options: Настройки конвейера.
        brain_mask: Маска мозга; по умолчанию f > 0.

    Returns:
        SegmentationResult — маска, поле u^N и статистика прогона.
    """
    f = as_field(f)
    if f.ndim not in (2, 3):
        raise DimensionError(f"ожидалось 2D-изображение или 3D-объём, получена форма {f.shape}")
    options = options or PipelineOptions()
    scheme = Scheme(scheme) if scheme is not None else options.scheme
    mode = Mode(mode) if mode is not None else options.mode

    brain = (
        np.asarray(brain_mask).astype(bool)
        if brain_mask is not None
        else default_brain_mask(f).astype(bool)
    )
    if brain.shape != f.shape:
        raise DimensionError(f"маска мозга {brain.shape} не совпадает с полем {f.shape}")

    stats = RunStats(scheme=scheme, mode=mode)

    if f.ndim == 2 or mode is Mode.VOLUME:
        # === Один прогон: изображение или объём целиком ===
        resolved = params.resolved(_resolve_delta(f, brain, params, options))
        outcomes = [_solve_one(f, resolved, scheme, options.track_energy, 0)]
        u = outcomes[0].solution
        stats.deltas.append(resolved.delta)
        stats.taus.append(resolved.tau)
    else:
        # === По срезам вдоль последней оси ===
        slice_params = _slice_params(f, brain, params, options)
        tasks = [
            (np.ascontiguousarray(f[..., s]), slice_params[s], scheme, options.track_energy, s)
            for s in range(f.shape[-1])
        ]
        outcomes = _run_slices(tasks, options.jobs)
        u = np.stack([o.solution for o in outcomes], axis=-1)
        stats.deltas.extend(p.delta for p in slice_params)
        stats.taus.extend(p.tau for p in slice_params)

    for outcome in outcomes:
        stats.steps += outcome.steps
        stats.inner_iterations += outcome.inner_iterations
        stats.seconds += outcome.seconds
        stats.energies.extend(outcome.energies)
    stats.negative_violation, stats.upper_violation = violation_norms(u)

    logger.debug(
        "segment: схема %s, режим %s, прогонов %d, %.2f с",
        scheme.value, mode.value, len(outcomes), stats.seconds,
    )
    return SegmentationResult(mask=finalize_mask(u), field=u, stats=stats)


def _slice_params(
    f: GridField, brain: npt.NDArray[np.bool_], params: FlowParams, options: PipelineOptions
) -> list[FlowParams]:
    """Параметры каждого среза: свой δ, общий δ объёма или заданный δ."""
    if params.delta is not None:
        shared = params.resolved()
        return [shared] * f.shape[-1]

    volume_delta: float | None = None

    def _volume_delta() -> float:
        nonlocal volume_delta
        if volume_delta is None:
            volume_delta = _resolve_delta(f, brain, params, options)
        return volume_delta

    if options.global_delta:
        shared = params.resolved(_volume_delta())
        return [shared] * f.shape[-1]

    result = []
    for s in range(f.shape[-1]):
        slice_brain = brain[..., s]
        if slice_brain.any():
            delta = _resolve_delta(f[..., s], slice_brain, params, options)
        else:
            # пустой срез: берём δ всего объёма
            delta = _volume_delta()
        result.append(params.resolved(delta))
    return result


def _run_slices(tasks: list[tuple], jobs: int) -> list[_RunOutcome]:
    """Прогоняет срезы последовательно или в пуле процессов; порядок сохраняется."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_one(*task) for task in tasks]

    # Игнорируем SIGINT в дочерних процессах — прерывание обрабатывает главный
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=signal.signal,
        initargs=(signal.SIGINT, signal.SIG_IGN),
    ) as executor:
        futures = [executor.submit(_solve_one, *task) for task in tasks]
        return [future.result() for future in futures]
