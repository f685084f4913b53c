"""VTC1 binary tensor files.

Layout (all little-endian)::

    b"VTC1" | dtype u8 (1 = float32) | rank u8 | rank x u32 dims | payload

The payload is row-major and must end exactly at end of file.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"VTC1"
DTYPE_F32 = 1
_F32 = np.dtype("<f4")


def encode(array) -> bytes:
    a = np.asarray(array)
    if a.ndim > 255:
        raise ValueError("rank must fit in a byte")
    if any(s > 0xFFFFFFFF for s in a.shape):
        raise ValueError("dimension does not fit in u32")
    header = MAGIC + struct.pack("<BB", DTYPE_F32, a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a, dtype=_F32).tobytes()


def decode(buf: bytes) -> np.ndarray:
    if len(buf) < 6:
        raise ParseError("file shorter than the fixed header", offset=len(buf), field="header")
    if buf[:4] != MAGIC:
        raise ParseError(f"bad magic {buf[:4]!r}", offset=0, field="magic")
    dtype, rank = buf[4], buf[5]
    if dtype != DTYPE_F32:
        raise ParseError(f"unsupported dtype code {dtype}", offset=4, field="dtype")
    dims_end = 6 + 4 * rank
    if len(buf) < dims_end:
        raise ParseError("truncated dimension list", offset=len(buf), field="dims")
    dims = struct.unpack_from(f"<{rank}I", buf, 6)
    count = 1
    for n in dims:
        count *= n
    expected = dims_end + 4 * count
    if len(buf) < expected:
        raise ParseError(f"payload truncated: need {4 * count} bytes", offset=len(buf), field="payload")
    if len(buf) > expected:
        raise ParseError(f"{len(buf) - expected} trailing bytes", offset=expected, field="payload")
    return np.frombuffer(buf, dtype=_F32, count=count, offset=dims_end).reshape(dims).astype(np.float32)


def write(path: str | Path, array) -> None:
    Path(path).write_bytes(encode(array))


def read(path: str | Path) -> np.ndarray:
    try:
        return decode(Path(path).read_bytes())
    except ParseError as e:
        raise ParseError(f"{path}: {e.message}", offset=e.offset, field=e.field) from None
