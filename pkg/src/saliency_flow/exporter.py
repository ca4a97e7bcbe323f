"""Экспорт результатов: JSON-отчёты, CSV замеров времени, метрик пакетной обработки и таблиц качества."""

import json
import sys
from dataclasses import asdict
from pathlib import Path

import pandas as pd

from .models import BenchRecord, CaseResult, CaseStatus
from .tables import QualityTable

BENCH_COLUMNS = ["scheme", "rho", "Q", "pixels", "steps", "seconds"]
METRICS_COLUMNS = [
    "case",
    "status",
    "delta",
    "seconds",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "recall",
    "dice",
    "baseline_dice",
    "error",
]
TABLE_COLUMNS = [
    "table",
    "label",
    "images",
    "average",
    "precision",
    "recall",
    "dice",
    "reference_precision",
    "reference_recall",
    "reference_dice",
    "difference_dice",
]


def write_report(report: dict[str, object], path: Path | None = None) -> None:
    """Пишет JSON-отчёт в файл или в stdout (если path не указан)."""
    text = json.dumps(report, ensure_ascii=False, indent=2, allow_nan=False)
    if path is None:
        sys.stdout.write(text + "\n")
        sys.stdout.flush()
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")


def bench_frame(records: list[BenchRecord]) -> pd.DataFrame:
    """Записи замеров в виде таблицы с колонками CSV."""
    rows = [
        {**asdict(r), "Q": r.q_levels}
        for r in records
    ]
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


def write_bench_csv(records: list[BenchRecord], output_path: Path) -> Path:
    """Сохраняет замеры в CSV (scheme,rho,Q,pixels,steps,seconds) в порядке записей.

    Args:
        records: Записи timing_sweep.
        output_path: Путь к CSV.

    Returns:
        Path — путь к созданному файлу.
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    bench_frame(records).to_csv(
        str(output_path),
        index=False,
        encoding="utf-8",
        lineterminator="\n",
    )
    return output_path


def _case_rows(results: list[CaseResult]) -> list[dict[str, object]]:
    rows = []
    for result in results:
        row: dict[str, object] = {
            "case": result.case_id,
            "status": result.status.value,
            "delta": result.delta,
            "seconds": result.seconds,
            "error": result.error_message,
        }
        if result.metrics is not None:
            row.update(result.metrics.to_dict())
        if result.baseline is not None:
            row["baseline_dice"] = result.baseline.dice
        rows.append(row)
    return rows


def append_metrics_csv(results: list[CaseResult], output_path: Path) -> None:
    """Дописывает метрики случаев в CSV; заголовок пишется только в новый файл.

    Args:
        results: Новые результаты.
        output_path: Путь к CSV-файлу.
    """
    if not results:
        return

    output_path.parent.mkdir(parents=True, exist_ok=True)
    write_header = not output_path.exists() or output_path.stat().st_size == 0
    frame = pd.DataFrame(_case_rows(results), columns=METRICS_COLUMNS)
    frame.to_csv(
        str(output_path),
        index=False,
        mode="a",
        header=write_header,
        encoding="utf-8",
        lineterminator="\n",
    )


def load_metrics_table(output_path: Path) -> pd.DataFrame:
    """Читает CSV метрик; отсутствующий или пустой файл даёт пустую таблицу."""
    if not output_path.exists() or output_path.stat().st_size == 0:
        return pd.DataFrame(columns=METRICS_COLUMNS)
    return pd.read_csv(str(output_path), dtype={"case": str})


def load_done_cases(output_path: Path) -> set[str]:
    """Случаи, уже обработанные в прошлых запусках (для --resume).

    Случаи с ошибкой не считаются обработанными и будут повторены.
    """
    table = load_metrics_table(output_path)
    if table.empty:
        return set()
    done = table[table["status"] != CaseStatus.ERROR.value]
    return {str(case) for case in done["case"]}


def table_frame(tables: list[QualityTable]) -> pd.DataFrame:
    """Строки таблиц качества: по одной на (таблица, строка, micro/macro)."""
    rows = []
    for table in tables:
        for row in table.rows:
            data = row.to_dict()
            reference = data.get("reference", {})
            for average in ("micro", "macro"):
                metrics = data[average]
                rows.append({
                    "table": table.name,
                    "label": row.label,
                    "images": data["images"],
                    "average": average,
                    **metrics,
                    **{f"reference_{name}": value for name, value in reference.items()},
                    "difference_dice": data.get("difference", {}).get(average, {}).get("dice"),
                })
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_table_csv(tables: list[QualityTable], output_path: Path) -> Path:
    """Сохраняет таблицы качества в CSV."""
    output_path.parent.mkdir(parents=True, exist_ok=True)
    table_frame(tables).to_csv(
        str(output_path),
        index=False,
        encoding="utf-8",
        lineterminator="\n",
    )
    return output_path
