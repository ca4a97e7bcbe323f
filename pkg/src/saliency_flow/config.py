"""Загрузка конфигурации из TOML: секции [flow] и [pipeline].

Приоритет: значения по умолчанию < файл конфигурации < флаги CLI.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections.abc import Mapping
from dataclasses import fields
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .models import FlowParams, PipelineOptions

# Ключ файла → поле FlowParams
FLOW_KEYS: dict[str, str] = {
    "p": "p",
    "epsilon": "epsilon",
    "alpha": "alpha",
    "lambda": "lam",
    "delta": "delta",
    "tau": "tau",
    "tau_safety": "tau_safety",
    "n_steps": "n_steps",
    "rho": "rho",
    "Q": "q_levels",
    "r0": "r0",
    "J": "inner_steps",
    "tol": "tol",
    "early_stop_tol": "early_stop_tol",
    "window": "window",
    "r_schedule": "r_schedule",
    "r_stopping": "r_stopping",
    "convolution": "convolution",
}

PIPELINE_KEYS = {f.name for f in fields(PipelineOptions)}

_INT_FIELDS = {"n_steps", "q_levels", "inner_steps", "jobs"}
_BOOL_FIELDS = {"global_delta", "track_energy"}
_STR_FIELDS = {"window", "r_schedule", "r_stopping", "convolution", "scheme", "mode"}
# Значение "auto" означает «вычислить автоматически»
_AUTO_FIELDS = {"delta", "tau", "early_stop_tol"}


def _coerce(section: str, key: str, name: str, value: Any) -> Any:
    """Проверяет тип значения; целые допускаются там, где ожидается float."""
    where = f"[{section}] {key}"
    if name in _AUTO_FIELDS and value == "auto":
        return None
    if name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: ожидалось true/false, получено {value!r}")
        return value
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: ожидалась строка, получено {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{where}: ожидалось число, получено {value!r}")
    if name in _INT_FIELDS:
        if not isinstance(value, int):
            raise ConfigError(f"{where}: ожидалось целое число, получено {value!r}")
        return value
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: ожидалось число, получено {value!r}")
    return float(value)


def _section(
    data: Mapping[str, Any], section: str, allowed: Mapping[str, str]
) -> dict[str, Any]:
    raw = data.get(section, {})
    if not isinstance(raw, Mapping):
        raise ConfigError(f"[{section}] должна быть таблицей")
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(f"неизвестный ключ [{section}] {key}")
        name = allowed[key]
        values[name] = _coerce(section, key, name, value)
    return values


def parse_config(
    data: Mapping[str, Any],
    flow_overrides: Mapping[str, Any] | None = None,
    pipeline_overrides: Mapping[str, Any] | None = None,
) -> tuple[FlowParams, PipelineOptions]:
    """Собирает параметры из разобранного TOML и переопределений CLI.

    Переопределения задаются по именам полей FlowParams / PipelineOptions;
    значения None игнорируются (флаг не указан).

    Raises:
        ConfigError: неизвестная секция или ключ, неверный тип.
        ParameterError: нарушено ограничение на параметры.
    """
    unknown = set(data) - {"flow", "pipeline"}
    if unknown:
        raise ConfigError(f"неизвестные секции конфигурации: {', '.join(sorted(unknown))}")

    flow = _section(data, "flow", FLOW_KEYS)
    pipeline = _section(data, "pipeline", {k: k for k in PIPELINE_KEYS})

    for target, overrides in ((flow, flow_overrides), (pipeline, pipeline_overrides)):
        for name, value in (overrides or {}).items():
            if value is not None:
                target[name] = value

    return FlowParams(**flow), PipelineOptions(**pipeline)


def load_config(
    path: Path | None = None,
    flow_overrides: Mapping[str, Any] | None = None,
    pipeline_overrides: Mapping[str, Any] | None = None,
) -> tuple[FlowParams, PipelineOptions]:
    """Читает TOML-файл (или только значения по умолчанию, если path=None).

    Args:
        path: Путь к файлу конфигурации.
        flow_overrides: Значения флагов CLI для FlowParams.
        pipeline_overrides: Значения флагов CLI для PipelineOptions.

    Returns:
        (FlowParams, PipelineOptions).
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: ошибка разбора TOML: {e}") from e
    return parse_config(data, flow_overrides, pipeline_overrides)
