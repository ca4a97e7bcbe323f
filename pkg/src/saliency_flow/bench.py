"""Эксперименты: сравнение схем, замер времени по сетке (ρ, Q), нарушение ограничения от r."""

import logging
import signal
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
import numpy.typing as npt

from .errors import DegenerateReferenceError, ParameterError
from .grid import GridField, as_field, relative_difference, violation_norms
from .kernels import WeightKernel, gaussian_weights, reaction_coefficients
from .models import BenchRecord, FlowParams, InnerDifference, Scheme, SchemeComparison
from .pipeline import default_brain_mask, estimate_delta, finalize_mask
from .solver_explicit import explicit_step, run_explicit
from .solver_quantized import run_quantized
from .solver_yosida import inner_r_loop, run_yosida, violation_energy

logger = logging.getLogger(__name__)


def _with_delta(f: GridField, params: FlowParams) -> FlowParams:
    """Фиксирует δ (оценкой по изображению, если не задан) и τ."""
    if params.delta is not None:
        return params.resolved()
    return params.resolved(estimate_delta(f, default_brain_mask(f)))


def compare_schemes(
    f: npt.ArrayLike,
    params: FlowParams,
    *,
    weights: WeightKernel | None = None,
) -> SchemeComparison:
    """Сравнивает схему Иосиды с явной усечённой схемой на одном поле.

    Обе схемы идут шаг за шагом от u⁰ = f; каждая внутренняя итерация
    Иосиды сравнивается с усечённым решением того же шага по времени.

    Returns:
        SchemeComparison с разницами по (n, j), итоговой относительной
        разницей, числом несовпавших пикселей масок и нормами нарушения.
    """
    f = as_field(f)
    params = _with_delta(f, params)
    w = weights if weights is not None else gaussian_weights(params.rho, f.ndim, params.window)
    rx = reaction_coefficients(params, f)

    differences: list[InnerDifference] = []
    u_truncated = f.copy()
    u_yosida = f.copy()

    for n in range(1, params.n_steps + 1):
        u_truncated = explicit_step(u_truncated, rx, w, params)
        reference = u_truncated

        def _observe(j: int, r: float, u_j: GridField, n: int = n) -> None:
            try:
                diff = relative_difference(u_j, reference)
            except DegenerateReferenceError:
                logger.debug("compare: нулевое усечённое решение на шаге %d", n)
                return
            differences.append(InnerDifference(step=n, inner=j, r=r, relative_difference=diff))

        u_yosida = inner_r_loop(u_yosida, rx, w, params, on_inner=_observe)

    mask_truncated = finalize_mask(u_truncated)
    mask_yosida = finalize_mask(u_yosida)
    negative, above_one = violation_norms(u_yosida)
    return SchemeComparison(
        inner_differences=differences,
        final_relative_difference=relative_difference(u_yosida, u_truncated),
        mask_disagreement=int(np.count_nonzero(mask_truncated != mask_yosida)),
        foreground_pixels=int(np.count_nonzero(mask_truncated)),
        negative_violation=negative,
        upper_violation=above_one,
    )


def violation_sweep(
    f: npt.ArrayLike,
    params: FlowParams,
    r_values: Sequence[float],
    *,
    weights: WeightKernel | None = None,
) -> list[tuple[float, float]]:
    """Нарушение ограничения при постоянном r.

    Для каждого r схема Иосиды идёт N шагов без расписания, и считается
    V(r) = τ·Σ_n Σ_k (|u^n⁻|² + |(u^n − 1)⁺|²).

    Returns:
        Список пар (r, V(r)) в порядке r_values.
    """
    f = as_field(f)
    params = _with_delta(f, params)
    w = weights if weights is not None else gaussian_weights(params.rho, f.ndim, params.window)

    points = []
    for r in r_values:
        total = 0.0

        def _accumulate(n: int, u: GridField) -> None:
            nonlocal total
            total += violation_energy(u)

        run_yosida(f, params, weights=w, fixed_r=r, monitor=_accumulate)
        points.append((float(r), params.tau * total))
        logger.debug("violation_sweep: r = %.4g, V = %.4e", r, params.tau * total)
    return points


def loglog_slope(points: Sequence[tuple[float, float]]) -> float:
    """Наклон прямой наименьших квадратов для log V от log r."""
    r = np.array([p[0] for p in points], dtype=np.float64)
    v = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(v <= 0):
        raise ParameterError("для наклона в log-log нужны V(r) > 0")
    slope, _ = np.polyfit(np.log(r), np.log(v), 1)
    return float(slope)


def _time_cell(f: GridField, params: FlowParams, scheme: Scheme) -> BenchRecord:
    """Замер одной ячейки. Функция уровня модуля — запускается в ProcessPoolExecutor."""
    steps = 0

    def _count(n: int, u: GridField) -> None:
        nonlocal steps
        steps = n

    start = time.perf_counter()
    if scheme is Scheme.EXPLICIT:
        run_explicit(f, params, monitor=_count)
    elif scheme is Scheme.QUANTIZED:
        run_quantized(f, params, monitor=_count, stop_at_fixed_point=False)
    else:
        run_yosida(f, params, monitor=_count)
    seconds = time.perf_counter() - start

    return BenchRecord(
        scheme=scheme.value,
        rho=params.rho,
        q_levels=params.q_levels,
        pixels=int(f.size),
        steps=steps,
        seconds=seconds,
    )


def timing_sweep(
    f: npt.ArrayLike,
    rho_list: Sequence[float],
    q_list: Sequence[int],
    schemes: Sequence[Scheme | str],
    params: FlowParams,
    *,
    jobs: int = 1,
    on_record: Callable[[BenchRecord], None] | None = None,
) -> list[BenchRecord]:
    """Замер времени по всем сочетаниям (схема, ρ, Q).

    Порядок записей: схема (в порядке аргумента), затем ρ по возрастанию,
    затем Q по возрастанию. Досрочная остановка (early_stop_tol и
    неподвижная точка квантованной схемы) отключается: каждая ячейка делает
    ровно N шагов.

    Args:
        f: Поле для замера.
        rho_list: Радиусы ядра.
        q_list: Числа уровней квантования.
        schemes: Схемы.
        params: Остальные параметры (общие для всех ячеек).
        jobs: Число процессов; > 1 искажает замеры, поэтому только по явному запросу.
        on_record: Вызывается после каждой готовой ячейки (прогресс-бар CLI).

    Returns:
        Список BenchRecord.
    """
    f = as_field(f)
    if not rho_list or not q_list or not schemes:
        raise ParameterError("списки rho, Q и схем должны быть непустыми")
    base = _with_delta(f, params)

    cells = [
        (f, replace(base, rho=float(rho), q_levels=int(q), early_stop_tol=None), Scheme(scheme))
        for scheme in dict.fromkeys(Scheme(s) for s in schemes)
        for rho in sorted(set(rho_list))
        for q in sorted(set(q_list))
    ]

    records: list[BenchRecord] = []

    def _collect(record: BenchRecord) -> None:
        records.append(record)
        if on_record is not None:
            on_record(record)

    if jobs <= 1:
        for cell in cells:
            _collect(_time_cell(*cell))
        return records

    logger.warning(
        "Параллельный замер (%d процессов): ячейки делят процессор, время завышено", jobs
    )
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=signal.signal,
        initargs=(signal.SIGINT, signal.SIG_IGN),
    ) as executor:
        futures = [executor.submit(_time_cell, *cell) for cell in cells]
        for future in futures:
            _collect(future.result())
    return records
