"""Чтение и запись полей: PGM P5 (2D) и RVOL (3D).

RVOL: 16-байтный заголовок — магия ``RVOL`` и три little-endian uint32
(L, M, S), затем L·M·S little-endian float32 в C-порядке, значения в [0, 1].
Читатели не угадывают: любое нарушение заголовка или размера данных —
ошибка формата.
"""

import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, FormatError
from .grid import GridField, SegmentationMask, as_field, clamp01, normalize_input

logger = logging.getLogger(__name__)

RVOL_MAGIC = b"RVOL"
RVOL_HEADER = np.dtype([("magic", "S4"), ("dims", "<u4", (3,))])
_WHITESPACE = b" \t\n\r\x0b\x0c"

FIELD_SUFFIXES = (".pgm", ".rvol")


# --- PGM ---

def _pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Разбирает заголовок P5: (width, height, maxval, offset данных)."""
    if data[:2] != b"P5":
        raise FormatError("ожидался бинарный PGM (магия P5)")
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise FormatError("заголовок PGM обрывается")
        byte = data[pos:pos + 1]
        if byte in _WHITESPACE:
            pos += 1
            continue
        if byte == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError("заголовок PGM обрывается в комментарии")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(f"некорректное поле заголовка PGM: {token!r}")
        tokens.append(int(token))

    # после maxval — ровно один пробельный символ
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise FormatError("после maxval должен идти один пробельный символ")
    width, height, maxval = tokens
    if width <= 0 or height <= 0:
        raise FormatError(f"недопустимые размеры PGM: {width}x{height}")
    if not 0 < maxval < 65536:
        raise FormatError(f"недопустимый maxval PGM: {maxval}")
    return width, height, maxval, pos + 1


def read_pgm(path: Path) -> tuple[npt.NDArray[np.uint16], int]:
    """Читает P5 и возвращает (коды формы (height, width), maxval)."""
    data = Path(path).read_bytes()
    width, height, maxval, offset = _pgm_header(data)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    payload = data[offset:]
    if len(payload) < expected:
        raise FormatError(f"данные PGM обрезаны: {len(payload)} из {expected} байт")
    if len(payload) > expected:
        raise FormatError(f"лишние байты после данных PGM: {len(payload) - expected}")

    codes = np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.uint16)
    if codes.size and int(codes.max()) > maxval:
        raise FormatError(f"отсчёт {int(codes.max())} больше maxval {maxval}")
    return codes, maxval


def write_pgm(path: Path, codes: npt.ArrayLike, maxval: int) -> Path:
    """Пишет коды [0, maxval] в P5 (8 бит при maxval < 256, иначе 16 бит big-endian)."""
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise DimensionError(f"PGM хранит только 2D-поля, получена форма {codes.shape}")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    height, width = codes.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + codes.astype(dtype).tobytes())
    return path


# --- RVOL ---

def read_rvol(path: Path) -> GridField:
    """Читает RVOL и возвращает поле формы (L, M, S)."""
    data = Path(path).read_bytes()
    if len(data) < RVOL_HEADER.itemsize:
        raise FormatError("файл RVOL короче заголовка")
    header = np.frombuffer(data, dtype=RVOL_HEADER, count=1)[0]
    if bytes(header["magic"]) != RVOL_MAGIC:
        raise FormatError("неверная магия RVOL")
    dims = tuple(int(d) for d in header["dims"])
    if min(dims) == 0:
        raise FormatError(f"нулевая размерность RVOL: {dims}")

    expected = int(np.prod(dims)) * 4
    payload = data[RVOL_HEADER.itemsize:]
    if len(payload) < expected:
        raise FormatError(f"данные RVOL обрезаны: {len(payload)} из {expected} байт")
    if len(payload) > expected:
        raise FormatError(f"лишние байты после данных RVOL: {len(payload) - expected}")

    values = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
    if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
        raise FormatError("значения RVOL должны быть конечными и лежать в [0, 1]")
    return values


def write_rvol(path: Path, field: npt.ArrayLike) -> Path:
    """Пишет 3D-поле (2D дополняется осью S = 1) в RVOL."""
    field = as_field(field)
    if field.ndim == 2:
        field = field[..., np.newaxis]
    if field.ndim != 3:
        raise DimensionError(f"RVOL хранит 2D/3D-поля, получена форма {field.shape}")
    header = np.zeros(1, dtype=RVOL_HEADER)
    header["magic"] = RVOL_MAGIC
    header["dims"] = field.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.tobytes() + field.astype("<f4").tobytes())
    return path


# --- Диспетчеризация по расширению ---

def _suffix(path: Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in FIELD_SUFFIXES:
        raise FormatError(f"неизвестный формат файла {path} (ожидалось .pgm или .rvol)")
    return suffix


def read_field(path: Path) -> GridField:
    """Читает нормализованное поле [0, 1] из PGM или RVOL."""
    if _suffix(path) == ".pgm":
        codes, maxval = read_pgm(path)
        return normalize_input(codes, maxval)
    return read_rvol(path)


def read_mask(path: Path) -> SegmentationMask:
    """Читает маску: ненулевые отсчёты — передний план."""
    if _suffix(path) == ".pgm":
        codes, _ = read_pgm(path)
        return (codes > 0).astype(np.uint8)
    return (read_rvol(path) > 0).astype(np.uint8)


def write_field(path: Path, field: npt.ArrayLike, *, bits: int = 16) -> Path:
    """Пишет поле в PGM (8/16 бит) или RVOL; значения вне [0, 1] усекаются с предупреждением."""
    field = as_field(field)
    clamped = clamp01(field)
    if not np.array_equal(clamped, field):
        logger.warning("Поле вне [0, 1] усечено при записи в %s", path)
    if _suffix(path) == ".pgm":
        if bits not in (8, 16):
            raise FormatError(f"PGM поддерживает 8 или 16 бит, получено {bits}")
        maxval = 255 if bits == 8 else 65535
        return write_pgm(path, np.rint(clamped * maxval), maxval)
    return write_rvol(path, clamped)


def write_mask(path: Path, mask: npt.ArrayLike) -> Path:
    """Пишет маску: 8-битный PGM {0, 255} или RVOL {0.0, 1.0}."""
    mask = np.asarray(mask).astype(bool)
    if _suffix(path) == ".pgm":
        return write_pgm(path, mask.astype(np.uint8) * 255, 255)
    return write_rvol(path, mask.astype(np.float64))
