"""CLI интерфейс с Rich-оформлением.

JSON-отчёты пишутся в stdout (или в файл --report), всё человекочитаемое —
баннер, таблицы, прогресс и журнал — в stderr.
"""

import argparse
import logging
import os
import time
from dataclasses import asdict
from itertools import islice
from pathlib import Path

from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
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
from rich.table import Table

from . import __version__
from .bench import compare_schemes, loglog_slope, timing_sweep, violation_sweep
from .config import FLOW_KEYS, PIPELINE_KEYS, load_config
from .converter import read_field, read_mask, write_field, write_mask
from .dataset import brats_adapter
from .errors import ParameterError, SaliencyFlowError
from .exporter import write_bench_csv, write_report, write_table_csv
from .grid import GridField
from .metrics import confusion
from .models import (
    BatchStats,
    BenchRecord,
    Convolution,
    FlowParams,
    MetricsReport,
    Mode,
    PipelineOptions,
    RSchedule,
    RStopping,
    Scheme,
    WindowShape,
)
from .phantom import make_phantom
from .pipeline import default_brain_mask, estimate_delta, naive_baseline, segment
from .processor import run_batch, summarize
from .solver_yosida import r_schedule
from .tables import DEFAULT_P_VALUES, QualityTable, mode_table, p_table

logger = logging.getLogger(__name__)

console = Console(stderr=True)

# Код выхода для ошибок ввода-вывода (файл не найден, нет прав)
EXIT_IO = 3


def build_stats_table(stats: BatchStats, elapsed: float) -> Table:
    """Строит Rich-таблицу со статистикой пакетной обработки."""
    table = Table(
        title="Статистика обработки",
        box=box.ROUNDED,
        show_header=False,
        title_style="bold cyan",
        border_style="cyan",
        padding=(0, 2),
    )
    table.add_column("Метрика", style="bold white", min_width=25)
    table.add_column("Значение", style="bold green", justify="right", min_width=15)

    table.add_row("Всего случаев", str(stats.total_cases))
    table.add_row("Обработано случаев", str(stats.processed_cases))
    if stats.resumed_from > 0:
        table.add_row("Пропущено (resume)", str(stats.resumed_from))
    table.add_row("Отброшено адаптером", str(stats.skipped_cases))
    table.add_row("Случаев с ошибками", str(stats.failed_cases))
    table.add_row("Успешность", f"{stats.success_rate:.1f}%")
    table.add_row("Время работы", format_elapsed(elapsed))

    if stats.processed_cases > 0:
        speed = elapsed / stats.processed_cases
        table.add_row("Скорость", f"{speed:.2f} сек/случай")

    return table


def build_errors_table(errors: list[str]) -> Table:
    """Строит таблицу с ошибками."""
    table = Table(
        title="Ошибки",
        box=box.ROUNDED,
        title_style="bold red",
        border_style="red",
    )
    table.add_column("#", style="dim", width=4)
    table.add_column("Описание", style="red")

    for i, err in enumerate(errors[:20], 1):
        table.add_row(str(i), err)

    if len(errors) > 20:
        table.add_row("...", f"и ещё {len(errors) - 20}")

    return table


def build_metrics_table(flow: MetricsReport, baseline: MetricsReport | None = None) -> Table:
    """Таблица метрик потока и (если есть) наивного порога."""
    table = Table(
        title="Метрики",
        box=box.ROUNDED,
        title_style="bold cyan",
        border_style="cyan",
    )
    table.add_column("Метод", style="bold white")
    for name in ("Precision", "Recall", "DICE"):
        table.add_column(name, style="bold green", justify="right")

    rows = [("Поток", flow)]
    if baseline is not None:
        rows.append(("Наивный порог", baseline))
    for label, report in rows:
        table.add_row(label, *(_format_metric(v) for v in (report.precision, report.recall, report.dice)))
    return table


def build_quality_table(table: QualityTable) -> Table:
    """Rich-таблица одной таблицы качества: macro-метрики и разница с опорными."""
    view = Table(
        title=f"Таблица {table.name} ({table.cases} случаев)",
        box=box.ROUNDED,
        title_style="bold cyan",
        border_style="cyan",
    )
    view.add_column("Строка", style="bold white")
    for name in ("Precision", "Recall", "DICE", "DICE micro", "Опорный DICE", "Δ DICE"):
        view.add_column(name, style="bold green", justify="right")

    for row in table.rows:
        data = row.to_dict()
        macro, micro = data["macro"], data["micro"]
        reference = data.get("reference", {}).get("dice")
        difference = data.get("difference", {}).get("macro", {}).get("dice")
        view.add_row(
            row.label,
            _format_metric(macro["precision"]),
            _format_metric(macro["recall"]),
            _format_metric(macro["dice"]),
            _format_metric(micro["dice"]),
            _format_metric(reference),
            "—" if difference is None else f"{difference:+.4f}",
        )
    return view


def _format_metric(value: float | None) -> str:
    return "—" if value is None else f"{value:.4f}"


def format_elapsed(seconds: float) -> str:
    """Форматирует секунды в человеко-читаемый вид."""
    if seconds < 60:
        return f"{seconds:.1f} сек"
    minutes = int(seconds // 60)
    secs = seconds % 60
    if minutes < 60:
        return f"{minutes} мин {secs:.0f} сек"
    hours = minutes // 60
    mins = minutes % 60
    return f"{hours} ч {mins} мин"


def _make_progress() -> Progress:
    return Progress(
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


# --- Параметры из конфигурации и флагов ---

def _load_params(args: argparse.Namespace) -> tuple[FlowParams, PipelineOptions]:
    """Значения по умолчанию < файл --config < флаги CLI."""
    flow_overrides = {name: getattr(args, name, None) for name in FLOW_KEYS.values()}
    pipeline_overrides = {name: getattr(args, name, None) for name in PIPELINE_KEYS}
    return load_config(args.config, flow_overrides, pipeline_overrides)


def _resolve_params(f: GridField, params: FlowParams, options: PipelineOptions) -> FlowParams:
    """Фиксирует δ (оценкой по изображению с коэффициентами конвейера) и τ."""
    if params.delta is not None:
        return params.resolved()
    delta = estimate_delta(
        f,
        default_brain_mask(f),
        slope=options.regression_slope,
        intercept=options.regression_intercept,
    )
    return params.resolved(delta)


# --- Команды ---

def cmd_segment(args: argparse.Namespace) -> int:
    """Сегментация одного изображения или объёма."""
    f = read_field(args.input)
    params, options = _load_params(args)
    brain = read_mask(args.brain_mask) if args.brain_mask else default_brain_mask(f)

    result = segment(f, params, options=options, brain_mask=brain)
    stats = result.stats.to_dict()

    report: dict[str, object] = {
        "command": "segment",
        "input": str(args.input),
        "scheme": stats["scheme"],
        "mode": stats["mode"],
        "params": params.to_dict(),
        "delta": stats["delta"],
        "tau": stats["tau"],
        "iterations": stats["iterations"],
        "timings": stats["timings"],
        "violation": stats["violation"],
        "energies": stats["energies"],
    }

    if args.metrics_against:
        truth = read_mask(args.metrics_against)
        metrics = confusion(result.mask, truth)
        baseline = confusion(naive_baseline(f, result.stats.deltas, brain), truth)
        report["metrics"] = metrics.to_dict()
        report["baseline"] = baseline.to_dict()
        console.print(build_metrics_table(metrics, baseline))

    if args.out_mask:
        write_mask(args.out_mask, result.mask)
    if args.out_field:
        write_field(args.out_field, result.field)

    write_report(report, args.report)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    """Сравнение схемы Иосиды с явной усечённой схемой."""
    f = read_field(args.input)
    params, options = _load_params(args)
    resolved = _resolve_params(f, params, options)

    start = time.perf_counter()
    comparison = compare_schemes(f, resolved)
    report: dict[str, object] = {
        "command": "compare-schemes",
        "input": str(args.input),
        "params": resolved.to_dict(),
        "delta": resolved.delta,
        "tau": resolved.tau,
        **comparison.to_dict(),
    }

    if args.r_sweep:
        r_values = r_schedule(resolved.r0, args.r_sweep)
        points = violation_sweep(f, resolved, r_values)
        report["violation_sweep"] = [{"r": r, "violation": v} for r, v in points]
        try:
            report["loglog_slope"] = loglog_slope(points)
        except ParameterError:
            # V(r) = 0 хотя бы в одной точке: ограничение не нарушалось
            report["loglog_slope"] = None

    report["timings"] = {"seconds": time.perf_counter() - start}
    console.print(
        f"Относительная разница: [bold]{comparison.final_relative_difference:.4f}[/], "
        f"несовпавших пикселей: [bold]{comparison.mask_disagreement}[/]"
    )
    write_report(report, args.report)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    """Замер времени по сетке (схема, ρ, Q) с записью CSV."""
    params, options = _load_params(args)
    if args.input:
        f = read_field(args.input)
    else:
        f = make_phantom((args.size, args.size), sigma=args.sigma, seed=args.seed).image
    resolved = _resolve_params(f, params, options)

    schemes = list(dict.fromkeys(Scheme(s) for s in args.schemes))
    total = len(schemes) * len(set(args.rho_list)) * len(set(args.q_list))

    with _make_progress() as progress:
        task = progress.add_task("Ячейки", total=total)
        records = timing_sweep(
            f,
            args.rho_list,
            args.q_list,
            schemes,
            resolved,
            jobs=args.jobs or 1,
            on_record=lambda record: progress.advance(task),
        )

    csv_path = write_bench_csv(records, args.csv)
    console.print(f"[bold green]Замеры сохранены:[/] {csv_path}")
    write_report(
        {
            "command": "bench-sweep",
            "params": resolved.to_dict(),
            "pixels": int(f.size),
            "records": [_bench_row(r) for r in records],
            "csv": str(csv_path),
        },
        args.report,
    )
    return 0


def _bench_row(record: BenchRecord) -> dict[str, object]:
    row = asdict(record)
    row["Q"] = row.pop("q_levels")
    return row


def cmd_make_phantom(args: argparse.Namespace) -> int:
    """Синтетический фантом с эталонной маской."""
    phantom = make_phantom(
        tuple(args.shape),
        blobs=args.blobs,
        foreground=args.foreground,
        background=args.background,
        sigma=args.sigma,
        seed=args.seed,
        axial_fraction=args.axial_fraction,
    )
    write_field(args.output, phantom.image, bits=args.bits)
    if args.truth:
        write_mask(args.truth, phantom.truth)

    write_report(
        {
            "command": "make-phantom",
            "output": str(args.output),
            "truth": str(args.truth) if args.truth else None,
            **phantom.describe(),
            "foreground": args.foreground,
            "background": args.background,
            "sigma": args.sigma,
        },
        args.report,
    )
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    """Метрики предсказанной маски относительно эталона."""
    metrics = confusion(read_mask(args.pred), read_mask(args.truth))
    console.print(build_metrics_table(metrics))
    write_report(
        {
            "command": "metrics",
            "pred": str(args.pred),
            "truth": str(args.truth),
            "metrics": metrics.to_dict(),
        },
        args.report,
    )
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    """Пакетная сегментация директории с метриками в CSV."""
    params, options = _load_params(args)
    input_dir = args.input.resolve()

    output_path = args.output.resolve()
    if output_path.suffix.lower() != ".csv":
        output_path = output_path.with_suffix(".csv")
        console.print(f"[yellow]Расширение результата изменено на .csv:[/] {output_path}")

    console.print(
        Panel(
            f"[bold]Saliency Flow[/bold] v{__version__}\n"
            f"Пакетная сегментация нелокальным p-лапласовским потоком",
            border_style="cyan",
            padding=(0, 2),
        )
    )

    # Режим работы
    if args.workers > 1:
        run_mode = f"параллельный ({args.workers} процессов)"
    else:
        run_mode = "последовательный"

    info_table = Table(box=box.SIMPLE, show_header=False, padding=(0, 2))
    info_table.add_column("", style="bold")
    info_table.add_column("")
    info_table.add_row("Входная папка:", str(input_dir))
    info_table.add_row("Результат:", str(output_path))
    info_table.add_row("Схема:", options.scheme.value)
    info_table.add_row("Режим:", options.mode.value)
    info_table.add_row("Обработка:", run_mode)
    info_table.add_row("Процессы по срезам:", str(1 if args.workers > 1 else options.jobs))
    info_table.add_row("delta:", "авто" if params.delta is None else f"{params.delta:g}")
    if args.resume:
        info_table.add_row("Resume:", "[green]Да — продолжение с прерванного места[/]")
    if args.limit:
        info_table.add_row("Лимит случаев:", str(args.limit))
    console.print(info_table)

    start_time = time.monotonic()
    stats = run_batch(
        input_dir,
        output_path,
        params,
        options,
        workers=args.workers,
        resume=args.resume,
        case_limit=args.limit,
        out_dir=args.masks_dir,
        require_truth=args.require_truth,
        console=console,
    )
    elapsed = time.monotonic() - start_time

    console.print()
    console.print(build_stats_table(stats, elapsed))
    if stats.errors:
        console.print()
        console.print(build_errors_table(stats.errors))

    summary = summarize(output_path)
    console.print()
    if stats.interrupted:
        console.print(
            Panel(
                f"[bold yellow]Обработка прервана.[/] Прогресс сохранён в:\n"
                f"  {output_path}\n\n"
                f"Для продолжения запустите с [bold]--resume[/]:\n"
                f"  [dim]python main.py batch {args.input} --resume -o {output_path.name}[/]",
                border_style="yellow",
            )
        )
    elif stats.processed_cases > 0:
        console.print(
            Panel(
                f"[bold green]Готово![/] Метрики сохранены:\n  {output_path}",
                border_style="green",
            )
        )
    else:
        console.print(
            Panel(
                "[bold yellow]Новых случаев не найдено.[/]\n"
                f"Ожидаются пары <case>_flair.rvol / <case>_seg.rvol в {input_dir}",
                border_style="yellow",
            )
        )

    write_report(
        {
            "command": "batch",
            "input": str(input_dir),
            "csv": str(output_path),
            "scheme": options.scheme.value,
            "mode": options.mode.value,
            "params": params.to_dict(),
            "cases": {
                "total": stats.total_cases,
                "processed": stats.processed_cases,
                "skipped": stats.skipped_cases,
                "failed": stats.failed_cases,
                "resumed_from": stats.resumed_from,
                "interrupted": stats.interrupted,
            },
            "metrics": summary["flow"],
            "baseline": {"macro_dice": summary["baseline_macro_dice"]},
            "timings": {"seconds": elapsed},
        },
        args.report,
    )
    return 0


def cmd_tables(args: argparse.Namespace) -> int:
    """Таблицы качества на наборе: наивный порог против потока по p и по режиму."""
    params, options = _load_params(args)
    input_dir = args.input.resolve()
    adapter = brats_adapter(input_dir, require_truth=True)
    names = ["p", "mode"] if args.table == "both" else [args.table]
    total = len(adapter) if args.limit is None else min(len(adapter), args.limit)

    tables: list[QualityTable] = []
    with _make_progress() as progress:
        for name in names:
            task = progress.add_task(f"Таблица {name}", total=total)
            cases = adapter if args.limit is None else islice(adapter, args.limit)

            def _advance(case_id: str, task: int = task) -> None:
                progress.advance(task)

            if name == "p":
                tables.append(p_table(cases, params, options, args.p_list, on_case=_advance))
            else:
                tables.append(mode_table(cases, params, options, on_case=_advance))

    for table in tables:
        console.print(build_quality_table(table))
        if table.errors:
            console.print(build_errors_table(table.errors))

    report: dict[str, object] = {
        "command": "tables",
        "input": str(input_dir),
        "scheme": options.scheme.value,
        "params": params.to_dict(),
        "skipped": list(dict.fromkeys(adapter.skipped)),
        "tables": [table.to_dict() for table in tables],
    }
    if args.csv:
        csv_path = write_table_csv(tables, args.csv)
        console.print(f"[bold green]Таблицы сохранены:[/] {csv_path}")
        report["csv"] = str(csv_path)

    write_report(report, args.report)
    return 0


# --- Разбор аргументов ---

def _flow_parent() -> argparse.ArgumentParser:
    """Флаги параметров модели; None — значение не указано."""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("параметры модели (перекрывают --config)")
    group.add_argument("--p", type=float, help="Показатель p > 0")
    group.add_argument("--epsilon", type=float, help="Регуляризация ε > 0")
    group.add_argument("--alpha", type=float, help="Вес регуляризации α > 0")
    group.add_argument("--lambda", dest="lam", type=float, help="Вес верности λ ≥ 0")
    group.add_argument("--delta", type=float, help="Наклон выделенности δ (по умолчанию оценивается)")
    group.add_argument("--tau", type=float, help="Шаг по времени τ (по умолчанию автоматически)")
    group.add_argument("--steps", dest="n_steps", type=int, help="Число шагов N")
    group.add_argument("--rho", type=float, help="Радиус ядра ρ в пикселях")
    group.add_argument("--q", dest="q_levels", type=int, help="Число уровней квантования Q")
    group.add_argument("--r0", type=float, help="Начальный параметр Иосиды r0")
    group.add_argument("--inner", dest="inner_steps", type=int, help="Число внутренних итераций J")
    group.add_argument("--tol", type=float, help="Допуск внутреннего цикла")
    group.add_argument("--early-stop", dest="early_stop_tol", type=float,
                       help="Досрочный выход при ||u^{n+1} - u^n||_inf < значения")
    group.add_argument("--window", choices=[w.value for w in WindowShape])
    group.add_argument("--r-schedule", dest="r_schedule", choices=[r.value for r in RSchedule])
    group.add_argument("--r-stopping", dest="r_stopping", choices=[r.value for r in RStopping])
    group.add_argument("--convolution", choices=[c.value for c in Convolution])

    group = parser.add_argument_group("конвейер")
    group.add_argument("--config", type=Path, default=None, help="TOML-файл конфигурации")
    group.add_argument("--scheme", choices=[s.value for s in Scheme])
    group.add_argument("--mode", choices=[m.value for m in Mode])
    group.add_argument("--global-delta", dest="global_delta",
                       action=argparse.BooleanOptionalAction, default=None,
                       help="Один δ на весь объём в режиме 2d")
    group.add_argument("--track-energy", dest="track_energy",
                       action=argparse.BooleanOptionalAction, default=None,
                       help="Считать энергию на каждом шаге")
    group.add_argument("--jobs", type=int, default=None, help="Процессов для срезов / ячеек")
    return parser


def _report_parent() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--report", type=Path, default=None,
                        help="Файл для JSON-отчёта (по умолчанию stdout)")
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Парсер командной строки со всеми подкомандами."""
    cpu_count = os.cpu_count() or 4
    flow = _flow_parent()
    report = _report_parent()

    parser = argparse.ArgumentParser(
        prog="saliency-flow",
        description="Сегментация выделяющихся областей нелокальным p-лапласовским реактивным потоком",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Подробный журнал (DEBUG)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[flow, report], help="Сегментация изображения или объёма")
    p.add_argument("input", type=Path, help="Входное поле (.pgm или .rvol)")
    p.add_argument("--out-mask", type=Path, default=None, help="Куда записать маску")
    p.add_argument("--out-field", type=Path, default=None, help="Куда записать поле u^N")
    p.add_argument("--metrics-against", type=Path, default=None, help="Эталонная маска")
    p.add_argument("--brain-mask", type=Path, default=None, help="Маска мозга (по умолчанию f > 0)")
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("compare-schemes", parents=[flow, report],
                       help="Сравнение схемы Иосиды с явной усечённой схемой")
    p.add_argument("input", type=Path, help="Входное поле")
    p.add_argument("--r-sweep", type=int, default=0,
                   help="Число значений постоянного r (r0, r0/2, ...) для замера нарушения ограничения")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("bench-sweep", parents=[flow, report], help="Замер времени по сетке (ρ, Q)")
    p.add_argument("input", type=Path, nargs="?", default=None,
                   help="Входное поле (по умолчанию фантом --size × --size)")
    p.add_argument("--rho-list", type=float, nargs="+", default=[2.0, 5.0, 10.0])
    p.add_argument("--q-list", type=int, nargs="+", default=[16, 64, 256])
    p.add_argument("--schemes", nargs="+", choices=[s.value for s in Scheme],
                   default=[Scheme.EXPLICIT.value, Scheme.QUANTIZED.value])
    p.add_argument("--csv", type=Path, default=Path("output/bench.csv"))
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("make-phantom", parents=[report], help="Синтетический фантом с эталонной маской")
    p.add_argument("output", type=Path, help="Файл изображения (.pgm или .rvol)")
    p.add_argument("--truth", type=Path, default=None, help="Файл эталонной маски")
    p.add_argument("--shape", type=int, nargs="+", default=[64, 64], help="L M [S]")
    p.add_argument("--blobs", type=int, default=2)
    p.add_argument("--foreground", type=float, default=0.8)
    p.add_argument("--background", type=float, default=0.3)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--axial-fraction", type=float, default=0.5)
    p.add_argument("--bits", type=int, choices=[8, 16], default=16, help="Разрядность PGM")
    p.set_defaults(handler=cmd_make_phantom)

    p = sub.add_parser("metrics", parents=[report], help="Precision / recall / DICE двух масок")
    p.add_argument("pred", type=Path)
    p.add_argument("truth", type=Path)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser(
        "batch",
        parents=[flow, report],
        help="Сегментация всех случаев директории",
        description="Пакетная сегментация. -w/--workers — процессы по случаям, "
                    "--jobs — процессы по срезам одного случая (режим 2d).",
    )
    p.add_argument("input", type=Path, help="Директория с парами <case>_flair.* / <case>_seg.*")
    p.add_argument("-o", "--output", type=Path, default=Path("output/metrics.csv"),
                   help="CSV с метриками (по умолчанию: output/metrics.csv)")
    p.add_argument("-w", "--workers", type=int, default=1,
                   help=f"Процессов для случаев (по умолчанию: 1, доступно ядер: {cpu_count}); "
                        "--jobs задаёт процессы для срезов внутри случая и при -w > 1 сбрасывается в 1")
    p.add_argument("--resume", action="store_true",
                   help="Продолжить с места прерывания (пропустить уже обработанные случаи)")
    p.add_argument("--limit", type=int, default=None, help="Макс. количество случаев")
    p.add_argument("--masks-dir", type=Path, default=None, help="Куда сохранять маски")
    p.add_argument("--require-truth", action="store_true", help="Пропускать случаи без эталона")
    p.set_defaults(handler=cmd_batch)

    p = sub.add_parser("tables", parents=[flow, report],
                       help="Таблицы качества: наивный порог против потока по p и по режиму")
    p.add_argument("input", type=Path, help="Директория с парами <case>_flair.* / <case>_seg.*")
    p.add_argument("--table", choices=["p", "mode", "both"], default="both")
    p.add_argument("--p-list", dest="p_list", type=float, nargs="+", default=list(DEFAULT_P_VALUES),
                   help="Значения p для таблицы p")
    p.add_argument("--limit", type=int, default=None, help="Макс. количество случаев")
    p.add_argument("--csv", type=Path, default=None, help="CSV со строками таблиц")
    p.set_defaults(handler=cmd_tables)

    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Парсит аргументы командной строки."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Валидация параметров
    if getattr(args, "workers", 1) < 1:
        parser.error("количество воркеров должно быть не менее 1")
    if getattr(args, "limit", None) is not None and args.limit < 1:
        parser.error("лимит случаев должен быть не менее 1")
    if args.command == "make-phantom" and len(args.shape) not in (2, 3):
        parser.error("--shape принимает 2 или 3 размера")
    return args


def setup_logging(verbose: bool) -> None:
    """Журнал через RichHandler в stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=verbose)],
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    """Главная точка входа."""
    args = parse_args(argv)
    setup_logging(args.verbose)

    try:
        return args.handler(args)
    except SaliencyFlowError as e:
        console.print(f"[bold red]Ошибка:[/] {e}")
        return e.exit_code
    except OSError as e:
        console.print(f"[bold red]Ошибка ввода-вывода:[/] {e}")
        return EXIT_IO
    except KeyboardInterrupt:
        console.print("[bold yellow]Прервано пользователем[/]")
        return 130
