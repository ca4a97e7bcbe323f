"""Квантованная схема (kernel based).

Значения поля лежат на фиксированном разбиении q_1..q_Q. Для каждого уровня
q_i нелокальная сумма превращается в корреляцию поля g_i = k(v − q_i) с
весовым окном, поэтому все уровни считаются быстрыми свёртками. Пиксель
уровня q_i берёт значение своего оператора K^i, после чего шаг
округляется обратно на разбиение.
"""

import logging
import math
from functools import lru_cache

import numpy as np
import numpy.typing as npt
from scipy import fft

from .errors import DimensionError
from .grid import GridField, QuantizationPartition, as_field, make_partition, round_to_partition
from .kernels import ReactionField, WeightKernel, flux, gaussian_weights, reaction_coefficients
from .models import Convolution, FlowParams
from .solver_explicit import StepMonitor, check_stability

logger = logging.getLogger(__name__)

# Ограничение на число элементов в одной пачке спектров уровней
_BATCH_ELEMENTS = 1 << 23


def correlate_direct(g: npt.ArrayLike, w: WeightKernel) -> GridField:
    """Прямая корреляция Σ_d w(d)·g[k+d] с нулевым продолжением."""
    g = as_field(g)
    out = np.zeros_like(g)
    for weight, target, source in w.pairs(g.shape):
        out[target] += weight * g[source]
    return out


class FFTCorrelator:
    """Корреляция с весовым окном через вещественное FFT с нулевым дополнением.

    Размер преобразования по оси — next_fast_len(max(n + 2R', 2n − 1)), где
    R' — радиус окна, обрезанный до n − 1. Так размер не зависит от ρ, пока
    окно помещается в поле, а циклического заворота нет.
    """

    def __init__(self, shape: tuple[int, ...], w: WeightKernel):
        if len(shape) != w.dimension:
            raise DimensionError(f"окно размерности {w.dimension} не подходит полю формы {shape}")
        self.shape = tuple(shape)
        radius = w.radius
        reach = tuple(min(radius, n - 1) for n in self.shape)
        crop = tuple(slice(radius - r, radius + r + 1) for r in reach)
        window = w.window[crop]

        self._axes = tuple(range(-len(self.shape), 0))
        self._fft_shape = tuple(
            fft.next_fast_len(max(n + 2 * r, 2 * n - 1), real=True)
            for n, r in zip(self.shape, reach)
        )
        self._spectrum = fft.rfftn(window, s=self._fft_shape, axes=self._axes)
        self._crop = tuple(slice(r, r + n) for n, r in zip(self.shape, reach))

    @property
    def fft_shape(self) -> tuple[int, ...]:
        return self._fft_shape

    def __call__(self, g: npt.ArrayLike) -> GridField:
        """Коррелирует поле формы ``shape`` или пачку полей формы (m, *shape)."""
        g = np.asarray(g, dtype=np.float64)
        batch_crop = (Ellipsis,) + self._crop
        spectrum = fft.rfftn(g, s=self._fft_shape, axes=self._axes)
        full = fft.irfftn(spectrum * self._spectrum, s=self._fft_shape, axes=self._axes)
        return np.ascontiguousarray(full[batch_crop])

    def batch_size(self) -> int:
        """Сколько полей уровней помещается в одну пачку преобразований."""
        return max(1, _BATCH_ELEMENTS // math.prod(self._fft_shape))


@lru_cache(maxsize=8)
def _cached_correlator(shape: tuple[int, ...], w: WeightKernel) -> FFTCorrelator:
    return FFTCorrelator(shape, w)


def level_operator(
    v: npt.ArrayLike,
    w: WeightKernel,
    q_i: float,
    eps: float,
    p: float,
    *,
    method: Convolution | str = Convolution.FFT,
) -> GridField:
    """Оператор уровня K^i(v)[k] = Σ_d w(d)·k(v[k+d] − q_i).

    Args:
        v: Поле на разбиении.
        w: Весовое окно.
        q_i: Уровень квантования.
        eps: Регуляризация ε.
        p: Показатель p.
        method: ``fft`` — быстрая корреляция, ``direct`` — прямая сумма.

    Returns:
        Поле K^i той же формы, что и v.
    """
    v = as_field(v)
    g = flux(v - q_i, eps, p)
    if Convolution(method) is Convolution.DIRECT:
        return correlate_direct(g, w)
    return _cached_correlator(v.shape, w)(g)


def level_operators(
    v: npt.ArrayLike,
    w: WeightKernel,
    q: QuantizationPartition,
    eps: float,
    p: float,
    *,
    method: Convolution | str = Convolution.FFT,
) -> GridField:
    """Для каждого пикселя — значение оператора его собственного уровня.

    Считаются только уровни, на которых есть пиксели; уровни FFT-пути
    обрабатываются пачками.
    """
    v = as_field(v)
    idx = q.level_index(v)
    populated = np.unique(idx)
    selected = np.empty_like(v)

    if Convolution(method) is Convolution.DIRECT:
        for i in populated:
            mask = idx == i
            selected[mask] = level_operator(v, w, q.levels[i], eps, p, method=Convolution.DIRECT)[mask]
        return selected

    correlator = _cached_correlator(v.shape, w)
    chunk = correlator.batch_size()
    for start in range(0, populated.size, chunk):
        levels = populated[start:start + chunk]
        shifts = q.levels[levels].reshape((-1,) + (1,) * v.ndim)
        stacked = correlator(flux(v[np.newaxis] - shifts, eps, p))
        for operator, i in zip(stacked, levels):
            mask = idx == i
            selected[mask] = operator[mask]
    return selected


def quantized_step(
    u_n: npt.ArrayLike,
    rx: ReactionField,
    w: WeightKernel,
    q: QuantizationPartition,
    params: FlowParams,
    *,
    rounding: bool = True,
) -> GridField:
    """Один шаг квантованной схемы.

    Для пикселя с u_n[k] = q_i: ũ[k] = (τα·K^i[k] + q_i − τ·b[k]) / (1 − τ·a),
    затем ũ округляется на разбиение (если ``rounding``).

    Raises:
        ContractError: если u_n не лежит на разбиении.
    """
    u_n = as_field(u_n)
    check_stability(params, rx.a)
    tau = params.tau
    k = level_operators(u_n, w, q, params.epsilon, params.p, method=params.convolution)
    value = (tau * params.alpha * k + u_n - tau * rx.b) / (1.0 - tau * rx.a)
    return round_to_partition(value, q) if rounding else value


def run_quantized(
    f: npt.ArrayLike,
    params: FlowParams,
    *,
    weights: WeightKernel | None = None,
    partition: QuantizationPartition | None = None,
    monitor: StepMonitor | None = None,
    stop_at_fixed_point: bool = True,
) -> GridField:
    """Квантованная схема: u⁰ = round(f), затем N шагов quantized_step.

    Коэффициент b строится по исходному (неокруглённому) f. Неподвижная точка
    шага завершает цикл досрочно, если ``stop_at_fixed_point``: дальнейшие
    шаги её не меняют. Замер времени отключает этот выход, чтобы выполнить
    ровно N шагов.
    """
    f = as_field(f)
    params = params.resolved()
    w = weights if weights is not None else gaussian_weights(params.rho, f.ndim, params.window)
    q = partition if partition is not None else make_partition(params.q_levels)
    rx = reaction_coefficients(params, f)
    check_stability(params, rx.a)

    u = round_to_partition(f, q)
    for n in range(params.n_steps):
        u_next = quantized_step(u, rx, w, q, params)
        change = float(np.max(np.abs(u_next - u)))
        u = u_next
        logger.debug("quantized: шаг %d, ||du||_inf = %.3e", n + 1, change)
        if monitor is not None:
            monitor(n + 1, u)
        settled = stop_at_fixed_point and change == 0.0
        if settled or (params.early_stop_tol is not None and change < params.early_stop_tol):
            logger.debug("quantized: стабилизация на шаге %d", n + 1)
            break
    return u
