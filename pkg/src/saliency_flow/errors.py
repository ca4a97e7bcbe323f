"""Исключения пакета и категории кодов выхода CLI."""


class SaliencyFlowError(Exception):
    """Базовая ошибка saliency-flow."""

    exit_code = 1


class InputRangeError(SaliencyFlowError, ValueError):
    """Значения входного поля вне допустимого диапазона."""

    exit_code = 3


class DimensionError(SaliencyFlowError, ValueError):
    """Несовпадение или недопустимая размерность полей."""

    exit_code = 3


class FormatError(SaliencyFlowError, ValueError):
    """Нарушение формата файла (заголовок, размер данных, отсчёты)."""

    exit_code = 3


class ParameterError(SaliencyFlowError, ValueError):
    """Нарушено ограничение на параметры модели или схемы."""

    exit_code = 4


class ConfigError(ParameterError):
    """Неизвестный ключ или неверный тип в файле конфигурации."""


class DegenerateReferenceError(SaliencyFlowError, ValueError):
    """Эталонное поле с нулевой нормой."""

    exit_code = 4


class ContractError(SaliencyFlowError, ValueError):
    """Вход не удовлетворяет контракту операции (например, поле вне квантования)."""

    exit_code = 5


class SolverError(SaliencyFlowError, RuntimeError):
    """Итерационный решатель не сошёлся за отведённое число итераций."""

    exit_code = 5

    def __init__(self, message: str, residual: float):
        # оба аргумента в args: pickle между процессами восстанавливает их
        super().__init__(message, residual)
        self.message = message
        self.residual = residual

    def __str__(self) -> str:
        return f"{self.message} (невязка {self.residual:.3e})"
