"""Метрики бинарной сегментации: матрица ошибок, precision, recall, DICE."""

from collections.abc import Iterable

import numpy as np
import numpy.typing as npt
import pandas as pd

from .errors import DimensionError
from .models import MetricsReport

METRIC_NAMES = ("precision", "recall", "dice")


def confusion(pred: npt.ArrayLike, truth: npt.ArrayLike) -> MetricsReport:
    """Считает tp/fp/fn/tn для двух бинарных масок одинаковой формы."""
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise DimensionError(f"формы масок не совпадают: {pred.shape} и {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size - tp - fp - fn)
    return MetricsReport(tp=tp, fp=fp, fn=fn, tn=tn)


def aggregate(reports: Iterable[MetricsReport]) -> dict[str, dict[str, object]]:
    """Усреднение по набору изображений.

    micro — метрики по суммарным счётчикам; macro — среднее определённых
    метрик отдельных изображений (неопределённые пропускаются).

    Returns:
        {"micro": {...}, "macro": {...}, "count": {"images": n}}.
    """
    reports = list(reports)
    pooled = sum(reports, MetricsReport(0, 0, 0, 0))
    micro = {name: getattr(pooled, name) for name in METRIC_NAMES}

    frame = pd.DataFrame(
        [{name: getattr(r, name) for name in METRIC_NAMES} for r in reports],
        columns=list(METRIC_NAMES),
        dtype=float,
    )
    means = frame.mean(skipna=True)
    macro = {name: (None if pd.isna(means[name]) else float(means[name])) for name in METRIC_NAMES}
    return {"micro": micro, "macro": macro, "count": {"images": len(reports)}}
