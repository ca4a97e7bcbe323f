"""Явная усечённая схема (patch based): прямые нелокальные суммы и усечение в [0, 1]."""

import logging
from collections.abc import Callable

import numpy as np
import numpy.typing as npt

from .errors import ParameterError
from .grid import GridField, as_field, clamp01
from .kernels import ReactionField, WeightKernel, flux, gaussian_weights, reaction_coefficients
from .models import FlowParams

logger = logging.getLogger(__name__)

# monitor(n, u) вызывается после каждого шага по времени
StepMonitor = Callable[[int, GridField], None]


def nonlocal_operator(u: npt.ArrayLike, w: WeightKernel, eps: float, p: float) -> GridField:
    """K(u)[k] = Σ_d w(d)·k_{ε,p}(u[k+d] − u[k]) с нулевым продолжением."""
    u = as_field(u)
    out = np.zeros_like(u)
    for weight, target, source in w.pairs(u.shape):
        out[target] += weight * flux(u[source] - u[target], eps, p)
    return out


def check_stability(params: FlowParams, a: float) -> None:
    """Проверяет 1 − τ·a > 0."""
    if 1.0 - params.tau * a <= 0:
        raise ParameterError(
            f"нарушено ограничение: 1 - tau*a > 0 (получено tau*a = {params.tau * a:.6g})"
        )


def explicit_step(
    u_n: npt.ArrayLike,
    rx: ReactionField,
    w: WeightKernel,
    params: FlowParams,
    *,
    truncate: bool = True,
) -> GridField:
    """Один шаг явной схемы.

    Args:
        u_n: Текущее поле.
        rx: Коэффициенты реакции.
        w: Весовое окно.
        params: Параметры с заданным τ.
        truncate: Усекать ли результат в [0, 1]. Без усечения возвращается
            значение до clamp (для сравнения со схемами).

    Returns:
        (τα·K(u_n) + u_n − τ·b) / (1 − τ·a), усечённое в [0, 1].
    """
    u_n = as_field(u_n)
    check_stability(params, rx.a)
    tau = params.tau
    k = nonlocal_operator(u_n, w, params.epsilon, params.p)
    value = (tau * params.alpha * k + u_n - tau * rx.b) / (1.0 - tau * rx.a)
    return clamp01(value) if truncate else value


def run_explicit(
    f: npt.ArrayLike,
    params: FlowParams,
    *,
    weights: WeightKernel | None = None,
    monitor: StepMonitor | None = None,
) -> GridField:
    """Явная схема: u⁰ = f, затем N шагов explicit_step.

    Если задан ``params.early_stop_tol``, цикл прерывается, когда
    ||u^{n+1} − u^n||_inf < early_stop_tol.
    """
    f = as_field(f)
    params = params.resolved()
    w = weights if weights is not None else gaussian_weights(params.rho, f.ndim, params.window)
    rx = reaction_coefficients(params, f)
    check_stability(params, rx.a)

    u = f.copy()
    for n in range(params.n_steps):
        u_next = explicit_step(u, rx, w, params)
        change = float(np.max(np.abs(u_next - u)))
        u = u_next
        logger.debug("explicit: шаг %d, ||du||_inf = %.3e", n + 1, change)
        if monitor is not None:
            monitor(n + 1, u)
        if params.early_stop_tol is not None and change < params.early_stop_tol:
            logger.debug("explicit: стабилизация на шаге %d", n + 1)
            break
    return u
