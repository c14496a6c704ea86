"""Candlestick and correlated-asset ingestion with date alignment.

Loads daily BTC OHLCV bars plus ETH and gold close series from CSV, validates
them, and joins them into one panel with a single row per BTC trading day.
Gaps in the ETH/gold calendars (weekends, holidays) are forward-filled from
the most recent prior value; BTC days before the first available ETH or gold
quote are dropped.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date as Date
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import AlignmentError, ParseError, ValidationError

BTC_COLUMNS = ("date", "open", "high", "low", "close", "adj_close", "volume")
ASSET_COLUMNS = ("date", "close")


@dataclass(frozen=True)
class Candle:
    """One daily OHLCV bar. Prices in USD, volume in quote units."""

    date: Date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float

    def __post_init__(self):
        for name in ("open", "high", "low", "close", "adj_close", "volume"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"{self.date}: {name} is not finite")
        if min(self.open, self.high, self.low, self.close, self.adj_close) <= 0:
            raise ValidationError(f"{self.date}: price fields must be strictly positive")
        if self.volume < 0:
            raise ValidationError(f"{self.date}: volume must be non-negative")
        if self.low > self.high:
            raise ValidationError(f"{self.date}: low {self.low} exceeds high {self.high}")
        if self.low > min(self.open, self.close):
            raise ValidationError(f"{self.date}: low above open/close")
        if self.high < max(self.open, self.close):
            raise ValidationError(f"{self.date}: high below open/close")

    @property
    def spread(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class CandleSeries:
    """Candles sorted strictly by date."""

    candles: tuple[Candle, ...]

    def __post_init__(self):
        for prev, cur in zip(self.candles, self.candles[1:]):
            if cur.date <= prev.date:
                raise ValidationError(f"candles out of order or duplicated at {cur.date}")

    def __len__(self) -> int:
        return len(self.candles)

    def __iter__(self):
        return iter(self.candles)

    @property
    def dates(self) -> tuple[Date, ...]:
        return tuple(c.date for c in self.candles)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.candles], dtype=float)

    def slice_dates(self, start: Date | None, end: Date | None) -> "CandleSeries":
        """Candles with start <= date <= end (open-ended on None)."""
        kept = tuple(
            c
            for c in self.candles
            if (start is None or c.date >= start) and (end is None or c.date <= end)
        )
        return CandleSeries(kept)


@dataclass(frozen=True)
class AssetSeries:
    """A single correlated asset: ordered (date, close) pairs."""

    asset_id: str
    dates: tuple[Date, ...]
    closes: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise ValidationError(f"{self.asset_id}: dates/closes length mismatch")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise ValidationError(f"{self.asset_id}: dates out of order or duplicated at {cur}")
        for d, p in zip(self.dates, self.closes):
            if not math.isfinite(p) or p <= 0:
                raise ValidationError(f"{self.asset_id}: non-positive price at {d}")

    def __len__(self) -> int:
        return len(self.dates)

    def value_at_or_before(self, day: Date) -> float | None:
        """Latest close at a date <= day, or None if the series starts later."""
        i = bisect_right(self.dates, day)
        if i == 0:
            return None
        return self.closes[i - 1]


@dataclass
class AlignedPanel:
    """One row per BTC trading day with ETH and gold closes filled in.

    Column arrays are materialized once and marked read-only; the panel is
    immutable after construction and safe to share across threads.
    """

    dates: tuple[Date, ...]
    candles: tuple[Candle, ...]
    eth: np.ndarray
    gold: np.ndarray
    _columns: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.eth = np.asarray(self.eth, dtype=float)
        self.gold = np.asarray(self.gold, dtype=float)
        if not (len(self.dates) == len(self.candles) == len(self.eth) == len(self.gold)):
            raise ValidationError("panel columns have mismatched lengths")
        self.eth.setflags(write=False)
        self.gold.setflags(write=False)
        for name in ("open", "high", "low", "close", "adj_close", "volume"):
            col = np.array([getattr(c, name) for c in self.candles], dtype=float)
            col.setflags(write=False)
            self._columns[name] = col
        self._columns["eth"] = self.eth
        self._columns["gold"] = self.gold

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Returns (header, [(line_number, cells), ...]); blank lines skipped."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0][1]]
    return header, rows[1:]


def _parse_date(cell: str, line: int) -> Date:
    try:
        return Date.fromisoformat(cell.strip())
    except ValueError as exc:
        raise ParseError(f"bad date {cell!r}: {exc}", line=line) from None


def _parse_float(cell: str, name: str, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"bad {name} value {cell!r}", line=line) from None


def load_candles(path: str | Path, schema: Mapping[str, str] | None = None) -> CandleSeries:
    """Load a BTC OHLCV CSV.

    `schema` maps logical column names (see BTC_COLUMNS) to the file's header
    names; identity by default. adj_close is optional and copied from close
    when the column is absent. Rows are sorted by date; duplicate dates and
    invariant violations are rejected.
    """
    schema = dict(schema or {})
    header, rows = _read_rows(path)
    col_idx: dict[str, int] = {}
    for logical in BTC_COLUMNS:
        name = schema.get(logical, logical)
        if name in header:
            col_idx[logical] = header.index(name)
        elif logical != "adj_close":
            raise ParseError(f"{path}: missing required column {name!r}", line=1)

    candles: list[Candle] = []
    seen: dict[Date, int] = {}
    for line, cells in rows:
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(cells)}", line=line)
        day = _parse_date(cells[col_idx["date"]], line)
        if day in seen:
            raise ValidationError(f"duplicate date {day} (lines {seen[day]} and {line})")
        seen[day] = line
        values = {
            name: _parse_float(cells[col_idx[name]], name, line)
            for name in ("open", "high", "low", "close", "volume")
        }
        if "adj_close" in col_idx:
            values["adj_close"] = _parse_float(cells[col_idx["adj_close"]], "adj_close", line)
        else:
            values["adj_close"] = values["close"]
        candles.append(Candle(date=day, **values))
    candles.sort(key=lambda c: c.date)
    return CandleSeries(tuple(candles))


def load_asset_series(path: str | Path, asset_id: str) -> AssetSeries:
    """Load a date,close CSV for one correlated asset; sorted and validated."""
    header, rows = _read_rows(path)
    for name in ASSET_COLUMNS:
        if name not in header:
            raise ParseError(f"{path}: missing required column {name!r}", line=1)
    i_date, i_close = header.index("date"), header.index("close")

    points: list[tuple[Date, float]] = []
    seen: dict[Date, int] = {}
    for line, cells in rows:
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(cells)}", line=line)
        day = _parse_date(cells[i_date], line)
        if day in seen:
            raise ValidationError(f"{asset_id}: duplicate date {day} (lines {seen[day]} and {line})")
        seen[day] = line
        points.append((day, _parse_float(cells[i_close], "close", line)))
    points.sort(key=lambda p: p[0])
    return AssetSeries(
        asset_id=asset_id,
        dates=tuple(p[0] for p in points),
        closes=tuple(p[1] for p in points),
    )


def align_panel(btc: CandleSeries, eth: AssetSeries, gold: AssetSeries) -> AlignedPanel:
    """Join ETH and gold closes onto the BTC calendar.

    Each BTC day takes the latest ETH/gold value at or before that day
    (forward fill over non-trading days). BTC days before the first ETH or
    gold quote are dropped; an empty result is an alignment error.
    """
    if len(btc) == 0 or len(eth) == 0 or len(gold) == 0:
        raise AlignmentError("all input series must be non-empty")
    dates: list[Date] = []
    candles: list[Candle] = []
    eth_vals: list[float] = []
    gold_vals: list[float] = []
    for candle in btc:
        e = eth.value_at_or_before(candle.date)
        g = gold.value_at_or_before(candle.date)
        if e is None or g is None:
            continue
        dates.append(candle.date)
        candles.append(candle)
        eth_vals.append(e)
        gold_vals.append(g)
    if not dates:
        raise AlignmentError("no BTC dates overlap the ETH/gold coverage")
    return AlignedPanel(
        dates=tuple(dates),
        candles=tuple(candles),
        eth=np.array(eth_vals),
        gold=np.array(gold_vals),
    )


def write_candles_csv(series: CandleSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BTC_COLUMNS)
        for c in series:
            writer.writerow(
                [c.date.isoformat()]
                + [repr(getattr(c, name)) for name in BTC_COLUMNS[1:]]
            )


def write_panel_csv(panel: AlignedPanel, path: str | Path) -> None:
    cols = ("open", "high", "low", "close", "adj_close", "volume", "eth", "gold")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + cols)
        for i, day in enumerate(panel.dates):
            writer.writerow([day.isoformat()] + [repr(float(panel.column(c)[i])) for c in cols])
