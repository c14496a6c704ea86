"""Long-only strategy execution over daily candles, with baselines.

Three strategies: buy-and-hold, a fast/slow SMA cross, and the model-signal
strategy (enter at the signal day's close with all cash, exit at the next
close, one action per day, signals while holding ignored). Equity is marked
to market daily from 1.0; no fees, slippage or leverage.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import AlignmentError, ConfigError, InsufficientDataError, ValidationError
from .indicators import sma
from .market_data import CandleSeries

TRADING_DAYS_PER_YEAR = 365


@dataclass(frozen=True)
class Trade:
    entry_date: Date
    entry_price: float
    exit_date: Date
    exit_price: float

    def __post_init__(self):
        if self.exit_date <= self.entry_date:
            raise ValidationError(f"trade exits {self.exit_date} on/before entry {self.entry_date}")

    @property
    def return_fraction(self) -> float:
        return self.exit_price / self.entry_price - 1.0


@dataclass(frozen=True)
class TradeLedger:
    trades: tuple[Trade, ...]

    def __post_init__(self):
        for prev, cur in zip(self.trades, self.trades[1:]):
            if cur.entry_date < prev.exit_date:
                raise ValidationError(f"trades overlap at {cur.entry_date}")

    def __len__(self) -> int:
        return len(self.trades)


@dataclass(frozen=True)
class EquityCurve:
    dates: tuple[Date, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise ValidationError("equity dates/values length mismatch")
        if len(self.values) and self.values[0] != 1.0:
            raise ValidationError("equity must start at 1.0")
        if np.any(np.asarray(self.values) <= 0):
            raise ValidationError("equity values must stay positive")


@dataclass(frozen=True)
class BacktestReport:
    profit_pct: float
    sharpe: float | None       # None when daily returns have zero variance
    sortino: float | None      # None when undefined; +inf sentinel allowed
    max_drawdown_pct: float
    win_pct: float | None      # None = not applicable (buy and hold)
    n_trades: int | None

    def as_dict(self) -> dict:
        def enc(v):
            if v is None:
                return "N.A."
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v

        return {
            "profit_pct": self.profit_pct,
            "sharpe": enc(self.sharpe),
            "sortino": enc(self.sortino),
            "max_drawdown_pct": self.max_drawdown_pct,
            "win_pct": enc(self.win_pct),
            "n_trades": enc(self.n_trades),
        }


@dataclass(frozen=True)
class BuyHold:
    name: str = "buy_hold"


@dataclass(frozen=True)
class MaCross:
    fast: int = 7
    slow: int = 21
    name: str = "ma_cross"

    def __post_init__(self):
        if not 1 <= self.fast < self.slow:
            raise ConfigError(f"fast window {self.fast} must be below slow {self.slow}")


@dataclass(frozen=True)
class ModelSignal:
    signals: Mapping[Date, bool]
    hold_through_signals: bool = False  # extend the hold while signals persist
    name: str = "model_signal"


def _mark_to_market(candles: CandleSeries, events: list[tuple[int, int]]) -> tuple[TradeLedger, EquityCurve]:
    """Build ledger and daily equity from (entry_index, exit_index) pairs."""
    closes = candles.column("close")
    dates = candles.dates
    values = np.ones(len(candles))
    cash = 1.0
    trades = []
    for entry, exit_ in events:
        trades.append(
            Trade(
                entry_date=dates[entry],
                entry_price=float(closes[entry]),
                exit_date=dates[exit_],
                exit_price=float(closes[exit_]),
            )
        )
        values[entry] = cash
        for t in range(entry + 1, exit_ + 1):
            values[t] = cash * closes[t] / closes[entry]
        cash = cash * closes[exit_] / closes[entry]
        values[exit_] = cash
    # flat segments: carry the latest cash value forward
    last = 1.0
    held = {t for entry, exit_ in events for t in range(entry, exit_ + 1)}
    for t in range(len(values)):
        if t in held:
            last = values[t]
        else:
            values[t] = last
    return TradeLedger(tuple(trades)), EquityCurve(dates=dates, values=values)


def run_signal_strategy(candles: CandleSeries, signals: Mapping[Date, bool]) -> tuple[TradeLedger, EquityCurve]:
    """Enter on a signal day's close while flat; exit at the next day's close.

    Signals on days already holding are ignored, and a signal on the final
    candle has no next close to exit at, so it is dropped with a warning.
    """
    if len(candles) == 0:
        raise InsufficientDataError("no candles to trade")
    dates = set(candles.dates)
    unknown = [d for d in signals if d not in dates]
    if unknown:
        raise AlignmentError(f"signals on non-candle dates, e.g. {min(unknown)}")
    events = []
    position_until = -1
    date_list = candles.dates
    for t, day in enumerate(date_list):
        if not signals.get(day, False) or t <= position_until:
            continue
        if t == len(date_list) - 1:
            warnings.warn(f"signal on final date {day} ignored (no exit day)", stacklevel=2)
            continue
        events.append((t, t + 1))
        position_until = t + 1
    return _mark_to_market(candles, events)


def run_buy_hold(candles: CandleSeries) -> tuple[TradeLedger, EquityCurve]:
    """Single position from the first close to the last close."""
    if len(candles) < 2:
        raise InsufficientDataError("buy and hold needs at least 2 candles")
    return _mark_to_market(candles, [(0, len(candles) - 1)])


def run_ma_cross(candles: CandleSeries, fast: int = 7, slow: int = 21) -> tuple[TradeLedger, EquityCurve]:
    """Buy when the fast SMA crosses above the slow SMA, sell on the reverse
    cross; any open position is closed at the final close."""
    if len(candles) <= slow:
        raise InsufficientDataError(f"ma cross needs more than {slow} candles")
    closes = candles.column("close")
    fast_ma = sma(closes, fast)
    slow_ma = sma(closes, slow)
    events = []
    entry = None
    for t in range(slow, len(candles)):
        above = fast_ma[t] > slow_ma[t]
        was_above = fast_ma[t - 1] > slow_ma[t - 1]
        if entry is None and above and not was_above:
            entry = t
        elif entry is not None and not above and was_above:
            events.append((entry, t))
            entry = None
    if entry is not None:
        if entry < len(candles) - 1:
            events.append((entry, len(candles) - 1))
        # an entry on the final candle cannot be exited; drop it
    return _mark_to_market(candles, events)


def compute_metrics(
    ledger: TradeLedger,
    equity: EquityCurve,
    periods_per_year: int = TRADING_DAYS_PER_YEAR,
    trades_not_applicable: bool = False,
) -> BacktestReport:
    """The six strategy metrics from a ledger and its daily equity curve."""
    values = np.asarray(equity.values, dtype=float)
    if len(values) == 0:
        raise InsufficientDataError("empty equity curve")
    profit_pct = (values[-1] / values[0] - 1.0) * 100.0

    returns = values[1:] / values[:-1] - 1.0 if len(values) > 1 else np.array([])
    ann = math.sqrt(periods_per_year)
    sharpe: float | None = None
    sortino: float | None = None
    if len(returns) >= 2:
        std = float(returns.std(ddof=1))
        if std > 0:
            sharpe = float(returns.mean()) / std * ann
        downside = float(np.sqrt(np.mean(np.minimum(returns, 0.0) ** 2)))
        if downside > 0:
            sortino = float(returns.mean()) / downside * ann
        elif returns.mean() > 0:
            sortino = math.inf

    peaks = np.maximum.accumulate(values)
    mdd = float(np.max((peaks - values) / peaks)) * 100.0

    if trades_not_applicable:
        win_pct = None
        n_trades = None
    else:
        n_trades = len(ledger)
        if n_trades:
            wins = sum(1 for t in ledger.trades if t.return_fraction > 0)
            win_pct = 100.0 * wins / n_trades
        else:
            win_pct = None
    return BacktestReport(
        profit_pct=float(profit_pct),
        sharpe=sharpe,
        sortino=sortino,
        max_drawdown_pct=mdd,
        win_pct=win_pct,
        n_trades=n_trades,
    )


def run_strategy(candles: CandleSeries, spec) -> tuple[TradeLedger, EquityCurve, BacktestReport]:
    if isinstance(spec, BuyHold):
        ledger, curve = run_buy_hold(candles)
        return ledger, curve, compute_metrics(ledger, curve, trades_not_applicable=True)
    if isinstance(spec, MaCross):
        ledger, curve = run_ma_cross(candles, spec.fast, spec.slow)
    elif isinstance(spec, ModelSignal):
        if spec.hold_through_signals:
            ledger, curve = _run_signal_extended(candles, spec.signals)
        else:
            ledger, curve = run_signal_strategy(candles, spec.signals)
    else:
        raise ConfigError(f"unknown strategy spec {type(spec).__name__}")
    return ledger, curve, compute_metrics(ledger, curve)


def _run_signal_extended(candles: CandleSeries, signals: Mapping[Date, bool]) -> tuple[TradeLedger, EquityCurve]:
    """Alternative consecutive-signal semantics: stay in while signals keep
    arriving; exit at the close of the first signal-free day."""
    dates = set(candles.dates)
    unknown = [d for d in signals if d not in dates]
    if unknown:
        raise AlignmentError(f"signals on non-candle dates, e.g. {min(unknown)}")
    date_list = candles.dates
    events = []
    entry = None
    for t, day in enumerate(date_list):
        if entry is None:
            if signals.get(day, False):
                if t == len(date_list) - 1:
                    warnings.warn(f"signal on final date {day} ignored (no exit day)", stacklevel=2)
                else:
                    entry = t
        elif t > entry and not signals.get(day, False):
            events.append((entry, t))
            entry = None
    if entry is not None:
        events.append((entry, len(date_list) - 1))
    return _mark_to_market(candles, events)


def compare_strategies(
    candles: CandleSeries,
    specs: Mapping[str, object],
    periods: Mapping[str, tuple[Date | None, Date | None]],
) -> dict[str, dict[str, BacktestReport]]:
    """One report per (period, strategy); periods are inclusive date ranges."""
    out: dict[str, dict[str, BacktestReport]] = {}
    for period_name, (start, end) in periods.items():
        window = candles.slice_dates(start, end)
        if len(window) == 0:
            raise InsufficientDataError(f"period {period_name!r} selects no candles")
        out[period_name] = {}
        window_dates = set(window.dates)
        for strat_name, spec in specs.items():
            if isinstance(spec, ModelSignal):
                spec = ModelSignal(
                    signals={d: v for d, v in spec.signals.items() if d in window_dates},
                    hold_through_signals=spec.hold_through_signals,
                    name=spec.name,
                )
            _, _, rep = run_strategy(window, spec)
            out[period_name][strat_name] = rep
    return out


def backtest_table(reports: Mapping[str, BacktestReport], title: str) -> str:
    header = (
        f"{'Strategy':<28} {'Profit %':>9} {'Sortino':>8} {'Sharpe':>7} "
        f"{'MaxDD %':>8} {'Win %':>6} {'Trades':>7}"
    )
    lines = [title, header, "-" * len(header)]

    def fmt(v, spec):
        width = int(spec.split(".")[0].rstrip("df"))
        if v is None:
            return f"{'N.A.':>{width}}"
        if isinstance(v, float) and math.isinf(v):
            return f"{'inf':>{width}}"
        return format(v, spec)

    for name, rep in reports.items():
        lines.append(
            f"{name:<28} {fmt(rep.profit_pct, '9.1f')} {fmt(rep.sortino, '8.2f')} "
            f"{fmt(rep.sharpe, '7.2f')} {fmt(rep.max_drawdown_pct, '8.1f')} "
            f"{fmt(rep.win_pct, '6.1f')} {fmt(rep.n_trades, '7d')}"
        )
    return "\n".join(lines) + "\n"


def write_equity_csv(curve: EquityCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "equity"))
        for d, v in zip(curve.dates, curve.values):
            writer.writerow((d.isoformat(), repr(float(v))))


def write_reports_json(table: dict[str, dict[str, BacktestReport]], path: str | Path) -> None:
    payload = {
        period: {name: rep.as_dict() for name, rep in row.items()}
        for period, row in table.items()
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
