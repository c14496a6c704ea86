"""The 13 technical indicators computed over the aligned panel.

Five moving averages (7/21-day simple, one exponential with a configurable
smoothing factor, 12/26-day exponential), MACD, 20-day rolling standard
deviation, Bollinger bands around the 21-day SMA, the daily high-low spread,
ETH and gold closes carried through, and a binary moving-average flag.

Sequence functions mark warm-up positions as NaN; the assembled frame drops
the first 25 panel rows so every column is defined from its first row.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InsufficientDataError, ShapeError, ValidationError
from .market_data import AlignedPanel, Candle

# Rows consumed before every windowed statistic is defined. The 26-day EMA
# span sets the nominal requirement; frames start at panel index 25.
WARMUP_ROWS = 25

INDICATOR_ORDER = (
    "ma7",
    "ma21",
    "ema",
    "ema12",
    "ema26",
    "macd",
    "sd20",
    "boll_upper",
    "boll_lower",
    "spread",
    "eth_close",
    "gold_close",
    "ma_feature",
)


@dataclass(frozen=True)
class IndicatorConfig:
    sma_fast: int = 7
    sma_slow: int = 21
    ema_alpha: float = 0.67
    ema_fast_span: int = 12
    ema_slow_span: int = 26
    std_window: int = 20
    bollinger_k: float = 2.0
    ma_feature_margin: float = 0.05

    def __post_init__(self):
        for name in ("sma_fast", "sma_slow", "ema_fast_span", "ema_slow_span"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 < self.ema_alpha <= 1:
            raise ConfigError("ema_alpha must be in (0, 1]")
        if self.std_window < 2:
            raise ConfigError("std_window must be >= 2")
        if self.bollinger_k <= 0:
            raise ConfigError("bollinger_k must be positive")


@dataclass(frozen=True)
class IndicatorFrame:
    """Per-date indicator columns; all values defined (no NaN)."""

    dates: tuple[Date, ...]
    ma7: np.ndarray
    ma21: np.ndarray
    ema: np.ndarray
    ema12: np.ndarray
    ema26: np.ndarray
    macd: np.ndarray
    sd20: np.ndarray
    boll_upper: np.ndarray
    boll_lower: np.ndarray
    spread: np.ndarray
    eth_close: np.ndarray
    gold_close: np.ndarray
    ma_feature: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        if name not in INDICATOR_ORDER:
            raise KeyError(name)
        return getattr(self, name)


def sma(series, n: int) -> np.ndarray:
    """Arithmetic mean of the n values ending at t; first n-1 entries NaN."""
    if n < 1:
        raise ConfigError("sma window must be >= 1")
    x = np.asarray(series, dtype=float)
    if len(x) < n:
        raise InsufficientDataError(f"sma({n}) needs at least {n} values, got {len(x)}")
    out = np.full(len(x), np.nan)
    out[n - 1 :] = sliding_window_view(x, n).mean(axis=-1)
    return out


def ema(series, alpha: float) -> np.ndarray:
    """Exponential moving average: e0 = x0, e_t = alpha*x_t + (1-alpha)*e_{t-1}."""
    if not 0 < alpha <= 1:
        raise ConfigError("ema alpha must be in (0, 1]")
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        raise InsufficientDataError("ema needs a non-empty series")
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, len(x)):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def ema_span(series, n: int) -> np.ndarray:
    """EMA with the span convention alpha = 2/(n+1)."""
    if n < 1:
        raise ConfigError("ema span must be >= 1")
    return ema(series, 2.0 / (n + 1))


def macd(series, fast: int = 12, slow: int = 26) -> np.ndarray:
    """Fast-span EMA minus slow-span EMA, elementwise."""
    return ema_span(series, fast) - ema_span(series, slow)


def rolling_std(series, n: int = 20) -> np.ndarray:
    """Sample standard deviation (n-1 divisor) over trailing windows; NaN head."""
    if n < 2:
        raise ConfigError("rolling_std window must be >= 2")
    x = np.asarray(series, dtype=float)
    if len(x) < n:
        raise InsufficientDataError(f"rolling_std({n}) needs at least {n} values, got {len(x)}")
    out = np.full(len(x), np.nan)
    out[n - 1 :] = sliding_window_view(x, n).std(axis=-1, ddof=1)
    return out


def bollinger(ma_center, sd, k: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Bands at center +/- k standard deviations."""
    center = np.asarray(ma_center, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if center.shape != sd.shape:
        raise ShapeError(f"bollinger inputs differ in shape: {center.shape} vs {sd.shape}")
    return center + k * sd, center - k * sd


def spread(candle: Candle) -> float:
    """Daily high-low distance."""
    return candle.high - candle.low


def ma_feature(sma_fast, close, margin: float = 0.05):
    """1 when the fast SMA is strictly more than `margin` above the close."""
    s = np.asarray(sma_fast, dtype=float)
    c = np.asarray(close, dtype=float)
    out = np.where(s > (1.0 + margin) * c, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


def compute_indicator_frame(panel: AlignedPanel, cfg: IndicatorConfig | None = None) -> IndicatorFrame:
    """All 13 indicators over the panel, starting after the warm-up rows."""
    cfg = cfg or IndicatorConfig()
    if len(panel) < WARMUP_ROWS + 1:
        raise InsufficientDataError(
            f"panel has {len(panel)} rows; need at least {WARMUP_ROWS + 1}"
        )
    close = panel.column("close")
    high = panel.column("high")
    low = panel.column("low")

    ma_fast = sma(close, cfg.sma_fast)
    ma_slow = sma(close, cfg.sma_slow)
    ema_plain = ema(close, cfg.ema_alpha)
    ema_fast = ema_span(close, cfg.ema_fast_span)
    ema_slow = ema_span(close, cfg.ema_slow_span)
    macd_line = ema_fast - ema_slow
    sd = rolling_std(close, cfg.std_window)
    upper, lower = bollinger(ma_slow, sd, cfg.bollinger_k)
    hl_spread = high - low
    flag = ma_feature(ma_fast, close, cfg.ma_feature_margin)

    s = slice(WARMUP_ROWS, None)
    frame = IndicatorFrame(
        dates=panel.dates[WARMUP_ROWS:],
        ma7=ma_fast[s].copy(),
        ma21=ma_slow[s].copy(),
        ema=ema_plain[s].copy(),
        ema12=ema_fast[s].copy(),
        ema26=ema_slow[s].copy(),
        macd=macd_line[s].copy(),
        sd20=sd[s].copy(),
        boll_upper=upper[s].copy(),
        boll_lower=lower[s].copy(),
        spread=hl_spread[s].copy(),
        eth_close=panel.eth[s].copy(),
        gold_close=panel.gold[s].copy(),
        ma_feature=flag[s].copy(),
    )
    _check_frame(frame)
    return frame


def _check_frame(frame: IndicatorFrame) -> None:
    for name in INDICATOR_ORDER:
        col = frame.column(name)
        if not np.all(np.isfinite(col)):
            raise ValidationError(f"indicator {name} contains non-finite values")
    if np.any(frame.boll_lower > frame.ma21) or np.any(frame.ma21 > frame.boll_upper):
        raise ValidationError("bollinger bands do not bracket the slow SMA")
    if np.any(frame.spread < 0):
        raise ValidationError("negative high-low spread")


def write_indicator_csv(frame: IndicatorFrame, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + INDICATOR_ORDER)
        for i, day in enumerate(frame.dates):
            writer.writerow(
                [day.isoformat()] + [repr(float(frame.column(c)[i])) for c in INDICATOR_ORDER]
            )
