"""Полунеявная схема с аппроксимациями Иосиды.

Внешний цикл идёт по времени, внутренний — по убывающему параметру r_j с
замороженными множествами χ₀ = {u_j ≤ 0}, χ₁ = {u_j ≥ 1}. На каждой
внутренней итерации решается симметричная положительно определённая
система

    (1 − τa)·u − τα·Σ_d w(d)·c_d·(u[k+d] − u[k]) + (τ/r)·(χ₀u + χ₁(u − 1)) = u_n − τb,

где c_d = ((u_n[k+d] − u_n[k])² + ε²)^{(p−2)/2} берётся с предыдущего шага
по времени. Система решается методом сопряжённых градиентов без явной
матрицы с диагональным (Якоби) предобуславливанием.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import partial

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ContractError, ParameterError, SolverError
from .grid import GridField, as_field
from .kernels import (
    ReactionField,
    WeightKernel,
    gaussian_weights,
    reaction_coefficients,
    shifted_pairs,
)
from .models import FlowParams, RSchedule, RStopping
from .solver_explicit import StepMonitor, check_stability

logger = logging.getLogger(__name__)

CG_RTOL = 1e-8
# Ниже этого значения r_j не уменьшается: τ/r остаётся конечным в CG
MIN_R = 2.0**-40

# on_inner(j, r_j, u_{j+1}) для inner_r_loop; run_yosida добавляет номер шага n
InnerObserver = Callable[[int, float, GridField], None]
StepInnerObserver = Callable[[int, int, float, GridField], None]


def yosida_beta(u: npt.ArrayLike, r: float) -> npt.NDArray[np.float64] | float:
    """β_r(u) = u/r при u ≤ 0, иначе 0."""
    if r <= 0:
        raise ParameterError("нарушено ограничение: r > 0")
    u = np.asarray(u, dtype=np.float64)
    value = np.where(u <= 0, u / r, 0.0)
    return value if value.ndim else float(value)


def yosida_gamma(u: npt.ArrayLike, r: float) -> npt.NDArray[np.float64] | float:
    """γ_r(u) = u/r при u ≥ 0, иначе 0."""
    if r <= 0:
        raise ParameterError("нарушено ограничение: r > 0")
    u = np.asarray(u, dtype=np.float64)
    value = np.where(u >= 0, u / r, 0.0)
    return value if value.ndim else float(value)


@dataclass(frozen=True, eq=False)
class PenaltyState:
    """Замороженные множества штрафа и текущий параметр r_j."""

    chi0: npt.NDArray[np.bool_]
    chi1: npt.NDArray[np.bool_]
    r: float

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise ParameterError("нарушено ограничение: r > 0")
        if np.any(self.chi0 & self.chi1):
            raise ContractError("пиксель не может одновременно нарушать u >= 0 и u <= 1")

    @classmethod
    def from_iterate(cls, u: GridField, r: float) -> "PenaltyState":
        return cls(chi0=u <= 0.0, chi1=u >= 1.0, r=r)

    @property
    def active(self) -> npt.NDArray[np.float64]:
        return (self.chi0 | self.chi1).astype(np.float64)


def r_schedule(r0: float, count: int, kind: RSchedule | str = RSchedule.GEOMETRIC) -> list[float]:
    """Первые ``count`` значений r_j.

    geometric: r_j = 2^{-j}·r0; super_geometric: r_j = 2^{-j}·r_{j-1}.
    Значения не опускаются ниже MIN_R.
    """
    if r0 <= 0:
        raise ParameterError("нарушено ограничение: r0 > 0")
    kind = RSchedule(kind)
    values: list[float] = []
    r = r0
    for j in range(count):
        if kind is RSchedule.GEOMETRIC:
            r = r0 * 2.0**-j
        elif j > 0:
            r = r * 2.0**-j
        values.append(max(r, MIN_R))
    return values


@dataclass(frozen=True, eq=False)
class DiffusionCouplings:
    """Коэффициенты w(d)·c_d для всех пар, замороженные на шаге по времени."""

    shape: tuple[int, ...]
    terms: list[tuple[npt.NDArray[np.float64], tuple[slice, ...], tuple[slice, ...]]]
    degree: GridField


def diffusion_couplings(u_n: npt.ArrayLike, w: WeightKernel, eps: float, p: float) -> DiffusionCouplings:
    """Строит веса рёбер w(d)·((u_n[k+d] − u_n[k])² + ε²)^{(p−2)/2}."""
    u_n = as_field(u_n)
    degree = np.zeros_like(u_n)
    terms = []
    for offset, weight in zip(w.offsets.tolist(), w.weights.tolist()):
        slices = shifted_pairs(u_n.shape, tuple(offset))
        if slices is None or not any(offset):
            continue
        target, source = slices
        diff = u_n[source] - u_n[target]
        coef = weight * (diff * diff + eps * eps) ** ((p - 2) / 2)
        degree[target] += coef
        terms.append((coef, target, source))
    return DiffusionCouplings(shape=u_n.shape, terms=terms, degree=degree)


def yosida_system(
    u_n: GridField,
    rx: ReactionField,
    params: FlowParams,
    couplings: DiffusionCouplings,
    state: PenaltyState | None,
) -> tuple[LinearOperator, npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Оператор системы без явной матрицы, правая часть и диагональ Якоби.

    Args:
        u_n: Поле предыдущего шага по времени.
        rx: Коэффициенты реакции.
        params: Параметры с заданным τ.
        couplings: Веса рёбер, построенные по u_n.
        state: Множества штрафа; None — система без штрафных членов.

    Returns:
        (A, rhs, diag) в виде плоских векторов длины u_n.size.
    """
    tau, alpha = params.tau, params.alpha
    shape = couplings.shape
    base = np.full(shape, 1.0 - tau * rx.a)
    rhs = u_n - tau * rx.b
    if state is not None:
        base = base + (tau / state.r) * state.active
        rhs = rhs + (tau / state.r) * state.chi1
    diag = base + tau * alpha * couplings.degree
    scale = tau * alpha

    def matvec(x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        u = np.asarray(x, dtype=np.float64).reshape(shape)
        out = diag * u
        for coef, target, source in couplings.terms:
            out[target] -= scale * coef * u[source]
        return out.ravel()

    size = int(np.prod(shape))
    operator = LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=np.float64)
    return operator, rhs.ravel(), diag.ravel()


def assemble_matrix(
    u_n: npt.ArrayLike,
    rx: ReactionField,
    params: FlowParams,
    couplings: DiffusionCouplings,
    state: PenaltyState | None,
) -> sparse.csr_matrix:
    """Та же система в виде разреженной CSR-матрицы (для проверок на малых полях)."""
    u_n = as_field(u_n)
    _, _, diag = yosida_system(u_n, rx, params, couplings, state)
    index = np.arange(u_n.size).reshape(u_n.shape)
    rows = [np.arange(u_n.size)]
    cols = [np.arange(u_n.size)]
    data = [diag]
    for coef, target, source in couplings.terms:
        rows.append(index[target].ravel())
        cols.append(index[source].ravel())
        data.append((-params.tau * params.alpha * coef).ravel())
    matrix = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(u_n.size, u_n.size),
    )
    return matrix.tocsr()


def assemble_and_solve(
    u_n: npt.ArrayLike,
    u_prev_j: npt.ArrayLike,
    rx: ReactionField,
    w: WeightKernel,
    params: FlowParams,
    r_j: float,
    *,
    couplings: DiffusionCouplings | None = None,
    penalty: bool = True,
) -> GridField:
    """Решает систему внутренней итерации j.

    Множества χ замораживаются по u_prev_j, модуль потока — по u_n.
    Начальное приближение CG — u_prev_j.

    Raises:
        SolverError: если CG не достиг относительной невязки 1e-8 за
            ceil(10·sqrt(n)) итераций.
    """
    u_n = as_field(u_n)
    u_prev_j = as_field(u_prev_j)
    check_stability(params, rx.a)
    if couplings is None:
        couplings = diffusion_couplings(u_n, w, params.epsilon, params.p)
    state = PenaltyState.from_iterate(u_prev_j, r_j) if penalty else None

    operator, rhs, diag = yosida_system(u_n, rx, params, couplings, state)
    preconditioner = LinearOperator(operator.shape, matvec=lambda x: x / diag, dtype=np.float64)
    maxiter = math.ceil(10 * math.sqrt(u_n.size))

    solution, info = cg(
        operator,
        rhs,
        x0=u_prev_j.ravel(),
        rtol=CG_RTOL,
        atol=0.0,
        maxiter=maxiter,
        M=preconditioner,
    )
    rhs_norm = float(np.linalg.norm(rhs))
    residual = float(np.linalg.norm(operator.matvec(solution) - rhs))
    relative = residual / rhs_norm if rhs_norm > 0 else residual
    if info != 0:
        raise SolverError(f"CG не сошёлся за {maxiter} итераций (r = {r_j:.3g})", relative)
    return solution.reshape(u_n.shape)


def inner_r_loop(
    u_n: npt.ArrayLike,
    rx: ReactionField,
    w: WeightKernel,
    params: FlowParams,
    *,
    couplings: DiffusionCouplings | None = None,
    fixed_r: float | None = None,
    penalty: bool = True,
    on_inner: InnerObserver | None = None,
) -> GridField:
    """Внутренний цикл по r_j для одного шага по времени.

    Args:
        u_n: Поле предыдущего шага.
        rx: Коэффициенты реакции.
        w: Весовое окно.
        params: Параметры (r0, J, tol, расписание, критерий остановки).
        couplings: Готовые веса рёбер по u_n (иначе строятся здесь).
        fixed_r: Держать r постоянным вместо расписания.
        penalty: Без штрафа система не зависит от u_j, выполняется одно решение.
        on_inner: Наблюдатель on_inner(j, r_j, u_{j+1}).

    Returns:
        Последняя внутренняя итерация.
    """
    u_n = as_field(u_n)
    if couplings is None:
        couplings = diffusion_couplings(u_n, w, params.epsilon, params.p)
    # J ограничивает цикл при любом критерии; tolerance может выйти раньше
    fixed = params.r_stopping is RStopping.FIXED
    if fixed_r is not None:
        radii = [fixed_r] * params.inner_steps
    else:
        radii = r_schedule(params.r0, params.inner_steps, params.r_schedule)

    u_j = u_n
    for j, r_j in enumerate(radii):
        u_next = assemble_and_solve(
            u_n, u_j, rx, w, params, r_j, couplings=couplings, penalty=penalty
        )
        change = float(np.max(np.abs(u_next - u_j)))
        u_j = u_next
        if on_inner is not None:
            on_inner(j, r_j, u_j)
        if not penalty:
            break
        if not fixed and change < params.tol:
            break
    return u_j


def violation_energy(u: npt.ArrayLike) -> float:
    """Σ (|u^-|² + |(u − 1)^+|²)."""
    u = np.asarray(u, dtype=np.float64)
    below = np.minimum(u, 0.0)
    above = np.maximum(u - 1.0, 0.0)
    return float(np.sum(below * below) + np.sum(above * above))


def run_yosida(
    f: npt.ArrayLike,
    params: FlowParams,
    *,
    weights: WeightKernel | None = None,
    fixed_r: float | None = None,
    penalty: bool = True,
    on_inner: StepInnerObserver | None = None,
    monitor: StepMonitor | None = None,
) -> GridField:
    """Схема Иосиды: u⁰ = f, затем N шагов, каждый — inner_r_loop.

    Args:
        f: Входное поле в [0, 1].
        params: Параметры схемы.
        weights: Весовое окно (по умолчанию гауссово по params.rho).
        fixed_r: Постоянный r во всех итерациях.
        penalty: Включать ли штрафные члены.
        on_inner: Наблюдатель on_inner(n, j, r_j, u_{j+1}) с n от 1.
        monitor: Наблюдатель monitor(n, u^n) после каждого шага.
    """
    f = as_field(f)
    params = params.resolved()
    w = weights if weights is not None else gaussian_weights(params.rho, f.ndim, params.window)
    rx = reaction_coefficients(params, f)
    check_stability(params, rx.a)

    u = f.copy()
    for n in range(1, params.n_steps + 1):
        observer = partial(on_inner, n) if on_inner is not None else None
        u_next = inner_r_loop(
            u, rx, w, params, fixed_r=fixed_r, penalty=penalty, on_inner=observer
        )
        change = float(np.max(np.abs(u_next - u)))
        u = u_next
        logger.debug(
            "yosida: шаг %d, ||du||_inf = %.3e, V = %.3e", n, change, violation_energy(u)
        )
        if monitor is not None:
            monitor(n, u)
        if params.early_stop_tol is not None and change < params.early_stop_tol:
            logger.debug("yosida: стабилизация на шаге %d", n)
            break
    return u
