"""Пакетная обработка набора данных — оркестрация сегментации по случаям.

Поддерживает:
- Параллельную обработку случаев (multiprocessing)
- Инкрементальную запись метрик в CSV каждые N случаев
- Возобновление после прерывания (resume)
- Корректное завершение по Ctrl+C с сохранением прогресса
"""

import signal
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)

from .converter import write_mask
from .dataset import DatasetCase, brats_adapter, load_case
from .exporter import append_metrics_csv, load_done_cases, load_metrics_table
from .metrics import aggregate, confusion
from .models import BatchStats, CaseResult, CaseStatus, FlowParams, MetricsReport, PipelineOptions
from .pipeline import default_brain_mask, naive_baseline, segment

# Каждые SAVE_EVERY случаев результаты дописываются в CSV
SAVE_EVERY = 5


def _process_case(
    case: DatasetCase,
    params: FlowParams,
    options: PipelineOptions,
    out_dir_str: str | None,
) -> CaseResult:
    """Обработка одного случая в отдельном процессе.

    Читает изображение → сегментирует → считает метрики потока и наивного
    порога относительно эталона. Эта функция запускается в ProcessPoolExecutor.

    Args:
        case: Случай набора данных.
        params: Параметры модели.
        options: Настройки конвейера.
        out_dir_str: Директория для масок (строка — для pickle-совместимости).

    Returns:
        CaseResult для этого случая.
    """
    try:
        image, truth = load_case(case)
        brain = default_brain_mask(image)
        result = segment(image, params, options=options, brain_mask=brain)

        if out_dir_str is not None:
            out_path = Path(out_dir_str) / f"{case.case_id}_mask{case.image_path.suffix}"
            write_mask(out_path, result.mask)

        outcome = CaseResult(
            case_id=case.case_id,
            status=CaseStatus.OK,
            delta=float(np.mean(result.stats.deltas)),
            seconds=result.stats.seconds,
        )
        if truth is not None:
            outcome.metrics = confusion(result.mask, truth)
            baseline = naive_baseline(image, result.stats.deltas, brain)
            outcome.baseline = confusion(baseline, truth)
        return outcome

    except Exception as e:
        return CaseResult(
            case_id=case.case_id,
            status=CaseStatus.ERROR,
            error_message=str(e),
        )


def run_batch(
    input_dir: Path,
    output_path: Path,
    params: FlowParams,
    options: PipelineOptions,
    *,
    workers: int = 1,
    resume: bool = False,
    case_limit: int | None = None,
    out_dir: Path | None = None,
    require_truth: bool = False,
    console: Console | None = None,
) -> BatchStats:
    """Запускает сегментацию всех случаев директории.

    Args:
        input_dir: Директория с парами ``<case>_flair.*`` / ``<case>_seg.*``.
        output_path: Путь для CSV с метриками.
        params: Параметры модели.
        options: Настройки конвейера.
        workers: Количество параллельных процессов (1 = последовательно).
        resume: Продолжить с места прерывания.
        case_limit: Макс. кол-во случаев (None = все).
        out_dir: Директория для масок (None = не сохранять).
        require_truth: Пропускать случаи без эталонной маски.
        console: Консоль для прогресс-бара.

    Returns:
        BatchStats — общая статистика сессии.
    """
    adapter = brats_adapter(input_dir, require_truth=require_truth)
    session = BatchStats(total_cases=len(adapter) + len(adapter.skipped))
    session.skipped_cases = len(adapter.skipped)
    session.errors.extend(adapter.skipped)

    # Внутри пула срезы считаются последовательно
    if workers > 1:
        options = replace(options, jobs=1)

    # --- Resume: пропускаем уже обработанные случаи ---
    done_cases: set[str] = set()
    if resume:
        done_cases = load_done_cases(output_path)
        session.resumed_from = len(done_cases & {c.case_id for c in adapter.cases})

    task_queue = [case for case in adapter.cases if case.case_id not in done_cases]
    if case_limit is not None:
        task_queue = task_queue[:case_limit]
    ordered_ids = [case.case_id for case in task_queue]

    if not task_queue:
        return session

    out_dir_str = str(out_dir) if out_dir is not None else None

    # --- Буфер и состояние ---
    buffer: list[CaseResult] = []
    interrupted = False
    # Параллельный режим: готовые случаи, ждущие более ранних по порядку имён
    ready: dict[str, CaseResult] = {}
    next_idx = 0

    def _flush_buffer() -> None:
        """Сбрасывает буфер в CSV."""
        nonlocal buffer
        if buffer:
            append_metrics_csv(buffer, output_path)
            buffer = []

    def _account(result: CaseResult) -> None:
        session.processed_cases += 1
        if result.status is CaseStatus.ERROR:
            session.failed_cases += 1
            session.errors.append(f"{result.case_id}: {result.error_message}")

    # --- Progress bar ---
    progress = Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        BarColumn(bar_width=40),
        TaskProgressColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        TimeRemainingColumn(),
        console=console,
        expand=False,
    )

    with progress:
        case_task = progress.add_task("Случаи", total=len(task_queue))

        if workers <= 1:
            # === Последовательный режим ===
            try:
                for case in task_queue:
                    result = _process_case(case, params, options, out_dir_str)
                    buffer.append(result)
                    _account(result)
                    progress.advance(case_task)

                    # Инкрементальное сохранение
                    if len(buffer) >= SAVE_EVERY:
                        _flush_buffer()

            except KeyboardInterrupt:
                interrupted = True

        else:
            # === Параллельный режим ===
            # Игнорируем SIGINT в дочерних процессах — корректно завершаем из главного
            original_sigint = signal.getsignal(signal.SIGINT)

            def _drain_ready_cases() -> None:
                """Переносит в буфер только последовательные случаи в порядке имён."""
                nonlocal next_idx
                while next_idx < len(ordered_ids):
                    result = ready.pop(ordered_ids[next_idx], None)
                    if result is None:
                        break
                    buffer.append(result)
                    next_idx += 1
                    if len(buffer) >= SAVE_EVERY:
                        _flush_buffer()

            try:
                with ProcessPoolExecutor(
                    max_workers=workers,
                    initializer=signal.signal,
                    initargs=(signal.SIGINT, signal.SIG_IGN),
                ) as executor:
                    futures = {
                        executor.submit(_process_case, case, params, options, out_dir_str): case.case_id
                        for case in task_queue
                    }

                    try:
                        for future in as_completed(futures):
                            case_id = futures[future]
                            try:
                                result = future.result()
                            except Exception as e:
                                result = CaseResult(
                                    case_id=case_id,
                                    status=CaseStatus.ERROR,
                                    error_message=str(e),
                                )

                            _account(result)
                            ready[case_id] = result
                            _drain_ready_cases()
                            progress.advance(case_task)

                    except KeyboardInterrupt:
                        interrupted = True
                        executor.shutdown(wait=False, cancel_futures=True)

            finally:
                signal.signal(signal.SIGINT, original_sigint)

    # --- Финальный сброс буфера ---
    # Готовые случаи за пропуском (после прерывания) пишутся в порядке имён
    buffer.extend(ready.pop(case_id) for case_id in ordered_ids[next_idx:] if case_id in ready)
    _flush_buffer()
    session.interrupted = interrupted

    return session


def summarize(output_path: Path) -> dict[str, object]:
    """Сводка по CSV метрик: micro/macro для потока и наивного порога.

    Для повторно обработанного случая берётся последняя запись.
    """
    table = load_metrics_table(output_path)
    if table.empty:
        return {"flow": aggregate([]), "baseline_macro_dice": None, "cases": 0}

    table = table.drop_duplicates(subset="case", keep="last")
    scored = table[(table["status"] == CaseStatus.OK.value) & table["tp"].notna()]
    reports = [
        MetricsReport(int(row.tp), int(row.fp), int(row.fn), int(row.tn))
        for row in scored.itertuples(index=False)
    ]
    baseline = scored["baseline_dice"].mean(skipna=True) if not scored.empty else float("nan")
    return {
        "flow": aggregate(reports),
        "baseline_macro_dice": None if pd.isna(baseline) else float(baseline),
        "cases": int(len(table)),
    }
