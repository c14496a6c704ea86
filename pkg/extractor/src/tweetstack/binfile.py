"""Writer for the binary per-day embedding stack format.

Layout, little-endian: magic b"PBEM", u32 version (1), u32 dim,
u32 max_slices, u32 n_days, then per day a u16 date-string length, the
ISO-8601 date bytes, u32 n_slices, and n_slices*dim float32 values in
row-major order. The reader on the consuming side validates this layout
byte-for-byte, so the writer is deliberately strict.
"""

from __future__ import annotations

import struct
from datetime import date as Date
from pathlib import Path

import numpy as np

from .errors import CapacityError, ExtractorError

MAGIC = b"PBEM"
FORMAT_VERSION = 1
DEFAULT_MAX_SLICES = 362

_HEADER = struct.Struct("<4sIIII")


def write_embedding_file(
    days: list[tuple[Date, np.ndarray]],
    path: str | Path,
    max_slices: int = DEFAULT_MAX_SLICES,
    dim: int = 768,
) -> None:
    """Write (date, n_slices x dim float32 matrix) records sorted by date."""
    days = sorted(days, key=lambda d: d[0])
    seen: set[Date] = set()
    for day, matrix in days:
        if matrix.ndim != 2 or matrix.shape[1] != dim:
            raise ExtractorError(f"{day}: matrix shape {matrix.shape}, expected (*, {dim})")
        if len(matrix) < 1:
            raise ExtractorError(f"{day}: a written day needs at least one slice")
        if len(matrix) > max_slices:
            raise CapacityError(
                f"{day}: {len(matrix)} slices exceed the declared maximum {max_slices}"
            )
        if not np.all(np.isfinite(matrix)):
            raise ExtractorError(f"{day}: non-finite embedding values")
        if day in seen:
            raise ExtractorError(f"duplicate date {day}")
        seen.add(day)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, max_slices, len(days)))
        for day, matrix in days:
            date_bytes = day.isoformat().encode("ascii")
            fh.write(struct.pack("<H", len(date_bytes)))
            fh.write(date_bytes)
            fh.write(struct.pack("<I", len(matrix)))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
