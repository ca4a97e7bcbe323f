"""Таблицы качества на наборе данных: наивный порог против потока.

Две таблицы:
- ``p`` — поток при нескольких значениях p (по умолчанию 2, 1, 0.5);
- ``mode`` — поток по срезам (2d) и объёмом целиком (3d).

Набор читается один раз: для каждого случая подряд считаются все
конфигурации таблицы. В строке — micro/macro precision, recall, DICE и, если
для строки есть опорные значения BraTS, разница с ними. Расхождения только
сообщаются, а не проверяются.
"""

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

from .errors import ParameterError, SaliencyFlowError
from .grid import GridField, SegmentationMask
from .metrics import METRIC_NAMES, aggregate, confusion
from .models import FlowParams, MetricsReport, Mode, PipelineOptions
from .pipeline import default_brain_mask, naive_baseline, segment

logger = logging.getLogger(__name__)

NAIVE_LABEL = "naive"
DEFAULT_P_VALUES = (2.0, 1.0, 0.5)

# Опорные значения на BraTS FLAIR: (precision, recall, DICE)
P_TABLE_REFERENCE: dict[str, tuple[float, float, float]] = {
    NAIVE_LABEL: (0.4431, 0.7904, 0.5299),
    "p=2": (0.5959, 0.7904, 0.6484),
    "p=1": (0.6799, 0.7798, 0.7013),
    "p=0.5": (0.7658, 0.7321, 0.7276),
}
MODE_TABLE_REFERENCE: dict[str, tuple[float, float, float]] = {
    NAIVE_LABEL: (0.5321, 0.8008, 0.6393),
    "2d": (0.8658, 0.7986, 0.8308),
    "3d": (0.9649, 0.8656, 0.9125),
}

CaseSource = Iterable[tuple[str, GridField, SegmentationMask | None]]


@dataclass(frozen=True)
class TableConfiguration:
    """Одна строка потока: подпись и параметры прогона."""

    label: str
    params: FlowParams
    options: PipelineOptions


def p_label(p: float) -> str:
    return f"p={p:g}"


def p_configurations(
    params: FlowParams, options: PipelineOptions, p_values: Sequence[float] = DEFAULT_P_VALUES
) -> list[TableConfiguration]:
    """Строки таблицы ``p``: одинаковые параметры, разные p."""
    if not p_values:
        raise ParameterError("список p должен быть непустым")
    values = list(dict.fromkeys(float(p) for p in p_values))
    return [TableConfiguration(p_label(p), replace(params, p=p), options) for p in values]


def mode_configurations(params: FlowParams, options: PipelineOptions) -> list[TableConfiguration]:
    """Строки таблицы ``mode``: 2d (по срезам), затем 3d (объём целиком)."""
    return [
        TableConfiguration(mode.value, params, replace(options, mode=mode))
        for mode in (Mode.SLICES, Mode.VOLUME)
    ]


@dataclass
class TableRow:
    """Метрики одной строки по всем случаям."""

    label: str
    reports: list[MetricsReport] = field(default_factory=list)
    reference: tuple[float, float, float] | None = None

    def summary(self) -> dict[str, dict[str, object]]:
        return aggregate(self.reports)

    def to_dict(self) -> dict[str, object]:
        summary = self.summary()
        row: dict[str, object] = {
            "label": self.label,
            "images": len(self.reports),
            "micro": summary["micro"],
            "macro": summary["macro"],
        }
        if self.reference is not None:
            reference = dict(zip(METRIC_NAMES, self.reference))
            row["reference"] = reference
            row["difference"] = {
                average: {
                    name: _difference(summary[average][name], reference[name])
                    for name in METRIC_NAMES
                }
                for average in ("micro", "macro")
            }
        return row


def _difference(value: object, reference: float) -> float | None:
    return None if value is None else float(value) - reference


@dataclass
class QualityTable:
    """Таблица: строка наивного порога и строки конфигураций потока."""

    name: str
    rows: list[TableRow]
    errors: list[str] = field(default_factory=list)

    @property
    def cases(self) -> int:
        return len(self.rows[0].reports) if self.rows else 0

    def row(self, label: str) -> TableRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "cases": self.cases,
            "rows": [row.to_dict() for row in self.rows],
            "errors": list(self.errors),
        }


def _evaluate_case(
    image: GridField, truth: SegmentationMask, configurations: Sequence[TableConfiguration]
) -> list[MetricsReport]:
    """Метрики наивного порога и всех конфигураций на одном случае.

    Наивный порог берёт δ первой конфигурации (по срезу в режиме 2d).
    """
    brain = default_brain_mask(image)
    naive: MetricsReport | None = None
    reports = []
    for configuration in configurations:
        result = segment(image, configuration.params, options=configuration.options, brain_mask=brain)
        if naive is None:
            naive = confusion(naive_baseline(image, result.stats.deltas, brain), truth)
        reports.append(confusion(result.mask, truth))
    return [naive, *reports]


def build_table(
    name: str,
    cases: CaseSource,
    configurations: Sequence[TableConfiguration],
    reference: Mapping[str, tuple[float, float, float]] | None = None,
    *,
    on_case: Callable[[str], None] | None = None,
) -> QualityTable:
    """Считает таблицу по случаям набора.

    Случай без эталона или с ошибкой сегментации пропускается целиком, чтобы
    все строки считались по одним и тем же случаям.

    Args:
        name: Имя таблицы (``p`` или ``mode``).
        cases: Пары (case_id, изображение, эталон), например из brats_adapter.
        configurations: Строки потока.
        reference: Опорные значения по подписи строки.
        on_case: Вызывается после каждого случая (прогресс-бар CLI).

    Returns:
        QualityTable со строкой ``naive`` первой.
    """
    if not configurations:
        raise ParameterError("таблица должна содержать хотя бы одну конфигурацию")
    reference = reference or {}
    labels = [NAIVE_LABEL, *(c.label for c in configurations)]
    table = QualityTable(
        name=name,
        rows=[TableRow(label, reference=reference.get(label)) for label in labels],
    )

    for case_id, image, truth in cases:
        if truth is None:
            table.errors.append(f"{case_id}: нет эталонной маски")
            logger.warning("Таблица %s: случай %s без эталона пропущен", name, case_id)
        else:
            try:
                reports = _evaluate_case(image, truth, configurations)
            except SaliencyFlowError as e:
                table.errors.append(f"{case_id}: {e}")
                logger.warning("Таблица %s: случай %s пропущен: %s", name, case_id, e)
            else:
                for row, report in zip(table.rows, reports):
                    row.reports.append(report)
        if on_case is not None:
            on_case(case_id)

    return table


def p_table(
    cases: CaseSource,
    params: FlowParams,
    options: PipelineOptions,
    p_values: Sequence[float] = DEFAULT_P_VALUES,
    *,
    on_case: Callable[[str], None] | None = None,
) -> QualityTable:
    """Наивный порог против потока при разных p."""
    return build_table(
        "p", cases, p_configurations(params, options, p_values), P_TABLE_REFERENCE, on_case=on_case
    )


def mode_table(
    cases: CaseSource,
    params: FlowParams,
    options: PipelineOptions,
    *,
    on_case: Callable[[str], None] | None = None,
) -> QualityTable:
    """Наивный порог против потока по срезам и объёмом целиком."""
    return build_table(
        "mode", cases, mode_configurations(params, options), MODE_TABLE_REFERENCE, on_case=on_case
    )
