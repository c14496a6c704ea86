"""Binary per-day embedding stacks: reader, writer, padding, label alignment.

File layout (little-endian throughout): magic b"PBEM", u32 version (1),
u32 dim, u32 max_slices, u32 n_days, then per day a u16 date-string length,
the ISO-8601 date bytes, u32 n_slices, and n_slices*dim float32 values in
row-major order. The reader rejects trailing bytes, truncated records,
unknown versions, and any dim other than 768.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    CapacityError,
    CorruptionError,
    DimensionError,
    EmbeddingFormatError,
    ValidationError,
)
from .features import LabelSet

MAGIC = b"PBEM"
FORMAT_VERSION = 1
EMBED_DIM = 768
DEFAULT_MAX_SLICES = 362

_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class EmbeddingFileHeader:
    version: int
    dim: int
    max_slices: int
    n_days: int


@dataclass(frozen=True)
class EmbeddingStack:
    """All slice embeddings for one day, rows ordered as sliced."""

    date: Date
    matrix: np.ndarray  # (n_slices, dim) float32

    def __post_init__(self):
        if self.matrix.ndim != 2 or len(self.matrix) < 1:
            raise ValidationError(f"{self.date}: stack must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValidationError(f"{self.date}: stack contains non-finite values")

    @property
    def n_slices(self) -> int:
        return len(self.matrix)


@dataclass(frozen=True)
class EmbeddingFile:
    header: EmbeddingFileHeader
    stacks: tuple[EmbeddingStack, ...]


@dataclass(frozen=True)
class AlignedEmbeddings:
    """Inner join of stacks and labels on date, plus what was dropped."""

    dates: tuple[Date, ...]
    stacks: tuple[EmbeddingStack, ...]
    labels: np.ndarray  # bool
    dropped_stack_dates: tuple[Date, ...]
    dropped_label_dates: tuple[Date, ...]

    def __len__(self) -> int:
        return len(self.dates)

    def padded_batch(self, indices, max_slices: int, dtype=np.float64) -> np.ndarray:
        out = np.zeros((len(indices), max_slices, EMBED_DIM), dtype=dtype)
        for row, i in enumerate(indices):
            stack = self.stacks[i]
            out[row, : stack.n_slices] = stack.matrix
        return out


def pad_stack(stack: EmbeddingStack, max_slices: int = DEFAULT_MAX_SLICES) -> np.ndarray:
    """Zero-pad to (max_slices, dim); refuses to truncate."""
    n, dim = stack.matrix.shape
    if n > max_slices:
        raise CapacityError(f"{stack.date}: {n} slices exceed the maximum {max_slices}")
    out = np.zeros((max_slices, dim), dtype=stack.matrix.dtype)
    out[:n] = stack.matrix
    return out


def _read_exact(fh, n: int, offset: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptionError(f"truncated while reading {what}", offset=offset)
    return buf


def read_embedding_file(path: str | Path) -> EmbeddingFile:
    """Load and validate a stack file; stacks come back sorted by date."""
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise EmbeddingFormatError(f"{path}: cannot read: {exc}") from None
    with fh:
        offset = 0
        head = _read_exact(fh, _HEADER.size, offset, "header")
        magic, version, dim, max_slices, n_days = _HEADER.unpack(head)
        if magic != MAGIC:
            raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise EmbeddingFormatError(f"{path}: unsupported version {version}")
        if dim != EMBED_DIM:
            raise DimensionError(f"{path}: dim {dim} (expected {EMBED_DIM})")
        offset += _HEADER.size

        stacks: list[EmbeddingStack] = []
        seen: set[Date] = set()
        for _ in range(n_days):
            raw = _read_exact(fh, 2, offset, "date length")
            (date_len,) = struct.unpack("<H", raw)
            offset += 2
            date_bytes = _read_exact(fh, date_len, offset, "date string")
            offset += date_len
            try:
                day = Date.fromisoformat(date_bytes.decode("ascii"))
            except (UnicodeDecodeError, ValueError) as exc:
                raise CorruptionError(f"bad date record: {exc}", offset=offset - date_len)
            raw = _read_exact(fh, 4, offset, "slice count")
            (n_slices,) = struct.unpack("<I", raw)
            offset += 4
            if n_slices < 1:
                raise CorruptionError(f"{day}: zero slices", offset=offset - 4)
            if n_slices > max_slices:
                raise ValidationError(
                    f"{day}: {n_slices} slices exceed the declared maximum {max_slices}"
                )
            body = _read_exact(fh, n_slices * dim * 4, offset, f"{day} embeddings")
            offset += n_slices * dim * 4
            matrix = np.frombuffer(body, dtype="<f4").reshape(n_slices, dim).copy()
            if day in seen:
                raise ValidationError(f"{path}: duplicate date {day}")
            seen.add(day)
            stacks.append(EmbeddingStack(date=day, matrix=matrix))
        if fh.read(1):
            raise CorruptionError(
                f"{path}: trailing bytes after {n_days} declared records", offset=offset
            )
    stacks.sort(key=lambda s: s.date)
    header = EmbeddingFileHeader(
        version=version, dim=dim, max_slices=max_slices, n_days=n_days
    )
    return EmbeddingFile(header=header, stacks=tuple(stacks))


def write_embedding_file(
    stacks,
    path: str | Path,
    max_slices: int = DEFAULT_MAX_SLICES,
    dim: int = EMBED_DIM,
) -> None:
    """Write stacks (sorted by date) in the binary layout above."""
    stacks = sorted(stacks, key=lambda s: s.date)
    seen: set[Date] = set()
    for stack in stacks:
        if stack.matrix.shape[1] != dim:
            raise DimensionError(f"{stack.date}: width {stack.matrix.shape[1]} != {dim}")
        if stack.n_slices > max_slices:
            raise CapacityError(
                f"{stack.date}: {stack.n_slices} slices exceed the maximum {max_slices}"
            )
        if stack.date in seen:
            raise ValidationError(f"duplicate date {stack.date}")
        seen.add(stack.date)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, max_slices, len(stacks)))
        for stack in stacks:
            date_bytes = stack.date.isoformat().encode("ascii")
            fh.write(struct.pack("<H", len(date_bytes)))
            fh.write(date_bytes)
            fh.write(struct.pack("<I", stack.n_slices))
            fh.write(np.ascontiguousarray(stack.matrix, dtype="<f4").tobytes())


def align_with_labels(stacks, labels: LabelSet) -> AlignedEmbeddings:
    """Inner join on date; unmatched dates are dropped and reported."""
    by_date = {s.date: s for s in stacks}
    label_map = labels.as_dict()
    shared = sorted(set(by_date) & set(label_map))
    if not shared:
        raise AlignmentError("no dates shared between stacks and labels")
    return AlignedEmbeddings(
        dates=tuple(shared),
        stacks=tuple(by_date[d] for d in shared),
        labels=np.array([label_map[d] for d in shared], dtype=bool),
        dropped_stack_dates=tuple(sorted(set(by_date) - set(shared))),
        dropped_label_dates=tuple(sorted(set(label_map) - set(shared))),
    )
