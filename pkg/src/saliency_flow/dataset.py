"""Адаптер набора данных: пары «изображение — эталонная маска» в директории.

Соглашение об именах: ``<case>_flair.rvol`` (или ``.pgm``) и
``<case>_seg.rvol`` с тем же расширением. Объёмы заранее переведены в RVOL
внешним конвертером; сам набор данных с пакетом не поставляется.
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

from .converter import FIELD_SUFFIXES, read_field, read_mask
from .errors import SaliencyFlowError
from .grid import GridField, SegmentationMask

logger = logging.getLogger(__name__)

IMAGE_TAG = "_flair"
TRUTH_TAG = "_seg"


@dataclass(frozen=True)
class DatasetCase:
    """Один случай: идентификатор и пути к файлам."""

    case_id: str
    image_path: Path
    truth_path: Path | None


def load_case(case: DatasetCase) -> tuple[GridField, SegmentationMask | None]:
    """Читает изображение и маску случая; проверяет совпадение размеров.

    Raises:
        SaliencyFlowError: файл повреждён или размеры не совпадают.
    """
    image = read_field(case.image_path)
    if case.truth_path is None:
        return image, None
    truth = read_mask(case.truth_path)
    if truth.shape != image.shape:
        raise SaliencyFlowError(
            f"{case.case_id}: размеры маски {truth.shape} и изображения {image.shape} не совпадают"
        )
    return image, truth


class BratsAdapter:
    """Перечисляет случаи директории и читает их по одному.

    Attributes:
        cases: Найденные случаи в порядке имён.
        skipped: Описания пропущенных случаев (нет пары, повреждённый файл).
    """

    def __init__(self, directory: Path, *, require_truth: bool = True):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise NotADirectoryError(f"директория не найдена: {self.directory}")
        self.require_truth = require_truth
        self.skipped: list[str] = []
        self.cases: list[DatasetCase] = self._discover()

    def _skip(self, message: str) -> None:
        logger.warning("Пропуск: %s", message)
        self.skipped.append(message)

    def _discover(self) -> list[DatasetCase]:
        cases = []
        for path in sorted(self.directory.iterdir()):
            suffix = path.suffix.lower()
            if not path.is_file() or suffix not in FIELD_SUFFIXES:
                continue
            stem = path.stem
            if stem.endswith(TRUTH_TAG):
                continue
            if stem.endswith(IMAGE_TAG):
                case_id = stem[: -len(IMAGE_TAG)]
            elif self.require_truth:
                continue
            else:
                case_id = stem

            truth_path = path.with_name(f"{case_id}{TRUTH_TAG}{path.suffix}")
            if not truth_path.is_file():
                if self.require_truth:
                    self._skip(f"{case_id}: нет эталонной маски {truth_path.name}")
                    continue
                truth_path = None
            cases.append(DatasetCase(case_id, path, truth_path))
        return cases

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[tuple[str, GridField, SegmentationMask | None]]:
        for case in self.cases:
            try:
                image, truth = load_case(case)
            except (SaliencyFlowError, OSError) as e:
                self._skip(str(e) if case.case_id in str(e) else f"{case.case_id}: {e}")
                continue
            yield case.case_id, image, truth


def brats_adapter(directory: Path, *, require_truth: bool = True) -> BratsAdapter:
    """Адаптер для директории с парами ``<case>_flair.*`` / ``<case>_seg.*``."""
    return BratsAdapter(directory, require_truth=require_truth)
