"""Slicing a day's token stream into overlapping windows.

Windows hold up to 200 tokens and start every 150 tokens, so consecutive
slices share exactly 50; the final window is whatever tail remains (always
longer than the 50-token overlap). Concatenating the slices with overlaps
removed reconstructs the day exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date

WINDOW = 200
OVERLAP = 50
STRIDE = WINDOW - OVERLAP


@dataclass(frozen=True)
class DaySlices:
    date: Date
    token_count: int
    slices: tuple[tuple[str, ...], ...]

    @property
    def n_slices(self) -> int:
        return len(self.slices)


def slice_tokens(tokens: list[str]) -> list[list[str]]:
    """Windows at offsets 0, 150, 300, ...; empty input gives no slices."""
    if not tokens:
        return []
    out = []
    start = 0
    while True:
        end = min(start + WINDOW, len(tokens))
        out.append(tokens[start:end])
        if end == len(tokens):
            return out
        start += STRIDE


def expected_slice_count(token_count: int) -> int:
    """Closed form for len(slice_tokens(tokens)) given the token count."""
    if token_count <= 0:
        return 0
    if token_count <= WINDOW:
        return 1
    return math.ceil((token_count - WINDOW) / STRIDE) + 1


def slice_day(day: Date, tokens: list[str]) -> DaySlices:
    return DaySlices(
        date=day,
        token_count=len(tokens),
        slices=tuple(tuple(s) for s in slice_tokens(tokens)),
    )
