"""Модели данных: параметры потока, режимы, статистика прогонов и метрики."""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np
import numpy.typing as npt

from .errors import ParameterError


class Scheme(str, Enum):
    """Численная схема решения."""

    EXPLICIT = "explicit"      # явная схема с усечением (patch based)
    QUANTIZED = "quantized"    # квантованная схема через свёртки (kernel based)
    YOSIDA = "yosida"          # полунеявная схема с аппроксимациями Иосиды


class Mode(str, Enum):
    """Режим обработки объёма."""

    SLICES = "2d"   # каждый срез отдельно
    VOLUME = "3d"   # весь объём одним прогоном


class WindowShape(str, Enum):
    """Форма носителя весового окна."""

    BALL = "ball"
    SQUARE = "square"


class RSchedule(str, Enum):
    """Расписание параметра Иосиды r_j."""

    GEOMETRIC = "geometric"              # r_j = 2^-j * r0
    SUPER_GEOMETRIC = "super_geometric"  # r_j = 2^-j * r_{j-1}


class RStopping(str, Enum):
    """Критерий остановки внутреннего r-цикла."""

    TOLERANCE = "tolerance"  # ||u_{j+1} - u_j||_inf < tol, не более inner_steps итераций
    FIXED = "fixed"          # ровно inner_steps итераций


class Convolution(str, Enum):
    """Способ вычисления операторов уровней квантования."""

    FFT = "fft"
    DIRECT = "direct"


@dataclass(frozen=True)
class FlowParams:
    """Параметры модели и численных схем.

    delta=None означает «оценить по изображению», tau=None — выбрать шаг
    автоматически (см. :meth:`auto_tau`). Поле ``lam`` — вес верности λ
    (в конфигурации ключ ``lambda``).
    """

    p: float = 0.5
    epsilon: float = 1e-2
    alpha: float = 0.5
    lam: float = 0.0
    delta: float | None = None
    tau: float | None = None
    tau_safety: float = 0.5
    n_steps: int = 50
    rho: float = 2.0
    q_levels: int = 256
    r0: float = 0.5
    inner_steps: int = 5
    tol: float = 1e-4
    early_stop_tol: float | None = None
    window: WindowShape = WindowShape.BALL
    r_schedule: RSchedule = RSchedule.GEOMETRIC
    r_stopping: RStopping = RStopping.TOLERANCE
    convolution: Convolution = Convolution.FFT

    def __post_init__(self) -> None:
        for name, enum_type in (
            ("window", WindowShape),
            ("r_schedule", RSchedule),
            ("r_stopping", RStopping),
            ("convolution", Convolution),
        ):
            try:
                object.__setattr__(self, name, enum_type(getattr(self, name)))
            except ValueError as e:
                raise ParameterError(f"{name}: недопустимое значение {getattr(self, name)!r}") from e

        _require(self.p > 0, "p > 0")
        _require(self.epsilon > 0, "epsilon > 0")
        _require(self.alpha > 0, "alpha > 0")
        _require(self.lam >= 0, "lambda >= 0")
        _require(self.delta is None or self.delta > 0, "delta > 0")
        _require(self.tau is None or self.tau >= 0, "tau >= 0")
        _require(0 < self.tau_safety < 1, "0 < tau_safety < 1")
        _require(self.n_steps >= 0, "n_steps >= 0")
        _require(self.rho > 0, "rho > 0")
        _require(self.q_levels >= 2, "Q >= 2")
        _require(self.r0 > 0, "r0 > 0")
        _require(self.inner_steps >= 1, "J >= 1")
        _require(self.tol > 0, "tol > 0")
        _require(
            self.early_stop_tol is None or self.early_stop_tol > 0,
            "early_stop_tol > 0",
        )

        if self.delta is not None:
            a = self.reaction_a
            _require(a > 0, f"delta^2/alpha - lambda > 0 (получено a = {a:.6g})")
            if self.tau is not None:
                _require(
                    1 - self.tau * a > 0,
                    f"1 - tau*a > 0 (получено tau*a = {self.tau * a:.6g})",
                )

    @property
    def reaction_a(self) -> float:
        """Коэффициент реакции a = δ²/α − λ."""
        if self.delta is None:
            raise ParameterError("delta не задан: укажите его или оцените по изображению")
        return self.delta**2 / self.alpha - self.lam

    @property
    def is_resolved(self) -> bool:
        return self.delta is not None and self.tau is not None

    def auto_tau(self, delta: float) -> float:
        """Шаг по времени τ = tau_safety / a, то есть τ·a = tau_safety < 1.

        Ограничение задаёт только знаменатель реакции 1 − τ·a: диффузионная
        часть в явной схеме усекается, в схеме Иосиды решается неявно.
        """
        a = delta**2 / self.alpha - self.lam
        _require(a > 0, f"delta^2/alpha - lambda > 0 (получено a = {a:.6g})")
        return self.tau_safety / a

    def resolved(self, delta: float | None = None) -> "FlowParams":
        """Возвращает копию с зафиксированными δ и τ.

        Args:
            delta: Значение δ (например, оценённое по изображению). Если не
                указано — используется ``self.delta``.

        Returns:
            FlowParams с заполненными delta и tau.
        """
        delta = self.delta if delta is None else delta
        if delta is None:
            raise ParameterError("delta не задан: укажите его или оцените по изображению")
        tau = self.tau if self.tau is not None else self.auto_tau(delta)
        return replace(self, delta=delta, tau=tau)

    def to_dict(self) -> dict[str, object]:
        """Параметры в виде словаря для JSON-отчётов (ключи как в конфигурации)."""
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return {
            key: value.value if isinstance(value, Enum) else value
            for key, value in data.items()
        }


def _require(condition: bool, inequality: str) -> None:
    if not condition:
        raise ParameterError(f"нарушено ограничение: {inequality}")


@dataclass(frozen=True)
class PipelineOptions:
    """Настройки конвейера сегментации (секция [pipeline] конфигурации)."""

    scheme: Scheme = Scheme.QUANTIZED
    mode: Mode = Mode.VOLUME
    global_delta: bool = False
    regression_slope: float = 1.176
    regression_intercept: float = 0.101
    jobs: int = 1
    track_energy: bool = True

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError as e:
            raise ParameterError(str(e)) from e
        _require(self.jobs >= 1, "jobs >= 1")


@dataclass
class EnergyRecord:
    """Значения энергии на одном шаге по времени."""

    run: int          # номер прогона (срез в режиме 2d, иначе 0)
    step: int
    nonlocal_energy: float
    saliency_energy: float
    fidelity_energy: float
    total: float


@dataclass
class RunStats:
    """Статистика одного вызова сегментации."""

    scheme: Scheme
    mode: Mode
    deltas: list[float] = field(default_factory=list)
    taus: list[float] = field(default_factory=list)
    steps: int = 0
    inner_iterations: int = 0
    seconds: float = 0.0
    energies: list[EnergyRecord] = field(default_factory=list)
    negative_violation: float = 0.0
    upper_violation: float = 0.0

    def to_dict(self) -> dict[str, object]:
        return {
            "scheme": self.scheme.value,
            "mode": self.mode.value,
            "delta": self.deltas,
            "tau": self.taus,
            "iterations": {"steps": self.steps, "inner": self.inner_iterations},
            "timings": {"solver_seconds": self.seconds},
            "violation": {
                "negative": self.negative_violation,
                "above_one": self.upper_violation,
            },
            "energies": [asdict(record) for record in self.energies],
        }


@dataclass
class SegmentationResult:
    """Результат сегментации: маска, поле потока u^N и статистика."""

    mask: npt.NDArray[np.uint8]
    field: npt.NDArray[np.float64]
    stats: RunStats


@dataclass(frozen=True)
class MetricsReport:
    """Матрица ошибок бинарной сегментации и производные метрики.

    Метрика с нулевым знаменателем не определена и возвращается как None.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def pixels(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def dice(self) -> float | None:
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def __add__(self, other: "MetricsReport") -> "MetricsReport":
        return MetricsReport(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "dice": self.dice,
        }


def _ratio(numerator: int, denominator: int) -> float | None:
    if denominator == 0:
        return None
    return numerator / denominator


@dataclass(frozen=True)
class BenchRecord:
    """Одна ячейка замера времени (схема, ρ, Q)."""

    scheme: str
    rho: float
    q_levels: int
    pixels: int
    steps: int
    seconds: float


@dataclass
class InnerDifference:
    """Относительная разница внутренней итерации Иосиды и усечённого решения."""

    step: int
    inner: int
    r: float
    relative_difference: float


@dataclass
class SchemeComparison:
    """Сравнение полунеявной схемы Иосиды с явной усечённой схемой."""

    inner_differences: list[InnerDifference]
    final_relative_difference: float
    mask_disagreement: int
    foreground_pixels: int
    negative_violation: float
    upper_violation: float

    @property
    def disagreement_fraction(self) -> float | None:
        """Доля несовпавших пикселей масок относительно переднего плана (None при пустом плане)."""
        if self.foreground_pixels == 0:
            return 0.0 if self.mask_disagreement == 0 else None
        return self.mask_disagreement / self.foreground_pixels

    def to_dict(self) -> dict[str, object]:
        return {
            "inner_differences": [asdict(d) for d in self.inner_differences],
            "final_relative_difference": self.final_relative_difference,
            "mask_disagreement": self.mask_disagreement,
            "foreground_pixels": self.foreground_pixels,
            "disagreement_fraction": self.disagreement_fraction,
            "violation": {
                "negative": self.negative_violation,
                "above_one": self.upper_violation,
            },
        }


class CaseStatus(str, Enum):
    """Статус обработки одного случая в пакетном режиме."""

    OK = "OK"
    ERROR = "ОШИБКА"


@dataclass
class CaseResult:
    """Результат обработки одного случая набора данных."""

    case_id: str
    status: CaseStatus = CaseStatus.OK
    metrics: MetricsReport | None = None
    baseline: MetricsReport | None = None
    delta: float | None = None
    seconds: float | None = None
    error_message: str | None = None


@dataclass
class BatchStats:
    """Общая статистика пакетной обработки."""

    total_cases: int = 0
    processed_cases: int = 0
    skipped_cases: int = 0       # пары, отброшенные адаптером
    failed_cases: int = 0
    errors: list[str] = field(default_factory=list)
    resumed_from: int = 0        # сколько случаев пропущено при resume
    interrupted: bool = False    # было ли прервано по Ctrl+C

    @property
    def success_rate(self) -> float:
        """Процент успешно обработанных случаев."""
        if self.processed_cases == 0:
            return 0.0
        ok = self.processed_cases - self.failed_cases
        return ok / self.processed_cases * 100
