"""Daily feature normalization, 5-day windowing, and extreme-move labels.

Each day carries 19 features in a fixed order. Three normalization rules
apply: price-anchored features become fractional changes versus the previous
BTC close, self-anchored features (volume, ETH, gold) become fractional
changes versus their own previous value, and level-free features (MACD, the
20-day std, the spread) are divided by the previous BTC close. The binary
moving-average flag passes through untouched.

Labels flag whether the day's high rose (up task) or low fell (down task) by
more than a threshold fraction relative to the previous close.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from datetime import date as Date
from typing import Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError, NormalizationError, ValidationError
from .indicators import IndicatorFrame, WARMUP_ROWS
from .market_data import AlignedPanel, CandleSeries

FEATURE_ORDER = (
    "open",
    "high",
    "low",
    "close",
    "adj_close",
    "volume",
    "ma7",
    "ma21",
    "ema",
    "ema26",
    "ema12",
    "macd",
    "sd20",
    "boll_upper",
    "boll_lower",
    "spread",
    "ma_feature",
    "eth",
    "gold",
)


class NormalizationRule(enum.Enum):
    VS_PREV_BTC_CLOSE = "vs_prev_btc_close"  # (x_t - close_{t-1}) / close_{t-1}
    VS_OWN_PREV = "vs_own_prev"              # (x_t - x_{t-1}) / x_{t-1}
    OVER_PREV_BTC_CLOSE = "over_prev_btc_close"  # x_t / close_{t-1}
    PASSTHROUGH = "passthrough"


DEFAULT_RULES: dict[str, NormalizationRule] = {
    **{
        name: NormalizationRule.VS_PREV_BTC_CLOSE
        for name in (
            "open", "high", "low", "close", "adj_close",
            "ma7", "ma21", "ema", "ema26", "ema12",
            "boll_upper", "boll_lower",
        )
    },
    **{name: NormalizationRule.VS_OWN_PREV for name in ("volume", "eth", "gold")},
    **{name: NormalizationRule.OVER_PREV_BTC_CLOSE for name in ("macd", "sd20", "spread")},
    "ma_feature": NormalizationRule.PASSTHROUGH,
}


@dataclass(frozen=True)
class FeatureFrame:
    """Normalized feature matrix: one row per date, columns in FEATURE_ORDER."""

    dates: tuple[Date, ...]
    matrix: np.ndarray  # (n, 19)

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape != (len(self.dates), len(FEATURE_ORDER)):
            raise ValidationError(
                f"feature matrix shape {self.matrix.shape} does not match "
                f"{len(self.dates)} dates x {len(FEATURE_ORDER)} features"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise ValidationError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, FEATURE_ORDER.index(name)]


@dataclass(frozen=True)
class WindowedSample:
    """Flattened window of consecutive feature rows ending at `date`."""

    date: Date
    x: np.ndarray


@dataclass(frozen=True)
class LabelSpec:
    direction: str  # "up" | "down"
    theta: float

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise ConfigError(f"unknown label direction {self.direction!r}")
        if self.theta <= 0:
            raise ConfigError("label threshold must be positive")

    @property
    def name(self) -> str:
        return f"{self.direction}{round(self.theta * 100)}"


TASKS = {
    "up5": LabelSpec("up", 0.05),
    "up2": LabelSpec("up", 0.02),
    "down5": LabelSpec("down", 0.05),
    "down2": LabelSpec("down", 0.02),
}


@dataclass(frozen=True)
class LabelSet:
    spec: LabelSpec
    dates: tuple[Date, ...]
    values: np.ndarray  # bool

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise ValidationError("label dates/values length mismatch")

    def __len__(self) -> int:
        return len(self.dates)

    def as_dict(self) -> dict[Date, bool]:
        return {d: bool(v) for d, v in zip(self.dates, self.values)}


@dataclass(frozen=True)
class DistStats:
    t: int
    f: int

    @property
    def true_ratio(self) -> float:
        return self.t / (self.t + self.f) if (self.t + self.f) else 0.0


def normalize(
    panel: AlignedPanel,
    indicators: IndicatorFrame,
    rules: dict[str, NormalizationRule] | None = None,
) -> FeatureFrame:
    """Normalize the joined panel + indicator columns into a FeatureFrame.

    The indicator frame must be the one computed from `panel` (it starts at
    panel row WARMUP_ROWS). The first joined row supplies previous-day values
    only, so the output has one row fewer than the indicator frame.
    """
    rules = rules or DEFAULT_RULES
    missing = set(FEATURE_ORDER) - set(rules)
    if missing:
        raise ConfigError(f"normalization rules missing for: {sorted(missing)}")
    if len(indicators) < 2:
        raise InsufficientDataError("need at least 2 indicator rows (first is the basis)")
    if panel.dates[WARMUP_ROWS:] != indicators.dates:
        raise ValidationError("indicator frame does not align with the panel")

    offset = WARMUP_ROWS  # panel row index of indicator row 0
    n_out = len(indicators) - 1
    raw: dict[str, np.ndarray] = {}
    for name in ("open", "high", "low", "close", "adj_close", "volume"):
        raw[name] = panel.column(name)[offset:]
    raw["eth"] = panel.column("eth")[offset:]
    raw["gold"] = panel.column("gold")[offset:]
    for src, dst in (
        ("ma7", "ma7"), ("ma21", "ma21"), ("ema", "ema"),
        ("ema26", "ema26"), ("ema12", "ema12"), ("macd", "macd"),
        ("sd20", "sd20"), ("boll_upper", "boll_upper"),
        ("boll_lower", "boll_lower"), ("spread", "spread"),
        ("ma_feature", "ma_feature"),
    ):
        raw[dst] = indicators.column(src)

    prev_close = raw["close"][:-1]
    matrix = np.empty((n_out, len(FEATURE_ORDER)), dtype=float)
    for j, name in enumerate(FEATURE_ORDER):
        cur = raw[name][1:]
        rule = rules[name]
        if rule is NormalizationRule.VS_PREV_BTC_CLOSE:
            matrix[:, j] = (cur - prev_close) / prev_close
        elif rule is NormalizationRule.OVER_PREV_BTC_CLOSE:
            matrix[:, j] = cur / prev_close
        elif rule is NormalizationRule.VS_OWN_PREV:
            prev_own = raw[name][:-1]
            zero = np.nonzero(prev_own == 0.0)[0]
            if zero.size:
                day = indicators.dates[zero[0] + 1]
                raise NormalizationError(
                    f"feature {name!r} has zero previous value at {day}"
                )
            matrix[:, j] = (cur - prev_own) / prev_own
        else:  # passthrough
            matrix[:, j] = cur
    return FeatureFrame(dates=indicators.dates[1:], matrix=matrix)


def build_windows(frame: FeatureFrame, w: int = 5) -> list[WindowedSample]:
    """One flattened sample per date from index w-1 onward (oldest row first)."""
    if w < 1:
        raise ConfigError("window length must be >= 1")
    if len(frame) < w:
        raise InsufficientDataError(f"frame has {len(frame)} rows; window needs {w}")
    samples = []
    for t in range(w - 1, len(frame)):
        x = frame.matrix[t - w + 1 : t + 1].reshape(-1).copy()
        samples.append(WindowedSample(date=frame.dates[t], x=x))
    return samples


def make_labels(candles: CandleSeries, spec: LabelSpec, source: str = "highlow") -> LabelSet:
    """Extreme-move labels against the previous close; first date unlabeled.

    With the default "highlow" source, the up task compares the day's high and
    the down task the day's low to the previous close. The "close" source
    compares the day's close instead (both directions).
    """
    if source not in ("highlow", "close"):
        raise ConfigError(f"unknown label source {source!r}")
    if len(candles) < 2:
        raise InsufficientDataError("need at least 2 candles to label")
    closes = candles.column("close")
    prev_close = closes[:-1]
    if source == "close":
        move = (closes[1:] - prev_close) / prev_close
        values = move > spec.theta if spec.direction == "up" else (-move) > spec.theta
    elif spec.direction == "up":
        highs = candles.column("high")[1:]
        values = (highs - prev_close) / prev_close > spec.theta
    else:
        lows = candles.column("low")[1:]
        values = (prev_close - lows) / prev_close > spec.theta
    return LabelSet(spec=spec, dates=candles.dates[1:], values=values)


def class_distribution(
    labels: LabelSet, split: tuple[Date | None, Date | None] | None = None
) -> DistStats:
    """True/false counts, optionally restricted to start <= date <= end."""
    if len(labels) == 0:
        raise ValidationError("empty label set")
    mask = np.ones(len(labels), dtype=bool)
    if split is not None:
        start, end = split
        dates = labels.dates
        mask = np.array(
            [
                (start is None or d >= start) and (end is None or d <= end)
                for d in dates
            ]
        )
    t = int(np.count_nonzero(labels.values & mask))
    f = int(np.count_nonzero(~labels.values & mask))
    return DistStats(t=t, f=f)


def pearson_correlations(frame: FeatureFrame) -> dict[str, float | None]:
    """Pearson r of each feature against the next day's normalized close.

    None marks a feature whose column (or the target) has zero variance.
    """
    if len(frame) < 3:
        raise InsufficientDataError("need at least 3 rows for correlations")
    target = frame.column("close")[1:]
    out: dict[str, float | None] = {}
    for name in FEATURE_ORDER:
        x = frame.column(name)[:-1]
        out[name] = _pearson(x, target)
    return out


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return None
    return float(xc @ yc) / denom


def split_masks(dates: Sequence[Date], boundary: Date) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) boolean masks: train strictly before the boundary date."""
    arr = np.array([d < boundary for d in dates])
    return arr, ~arr


def write_features_csv(frame: FeatureFrame, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date",) + FEATURE_ORDER)
        for i, day in enumerate(frame.dates):
            writer.writerow([day.isoformat()] + [repr(float(v)) for v in frame.matrix[i]])


def write_labels_csv(labels: LabelSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "label"))
        for d, v in zip(labels.dates, labels.values):
            writer.writerow((d.isoformat(), int(v)))


# conventional indicator spellings for emitted tables
DISPLAY_NAMES = {
    "ema26": "26ema",
    "ema12": "12ema",
    "sd20": "20sd",
    "boll_upper": "upper_band",
    "boll_lower": "lower_band",
}


def write_correlations_csv(corr: dict[str, float | None], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("feature", "pearson_r"))
        for name in FEATURE_ORDER:
            r = corr[name]
            writer.writerow(
                (DISPLAY_NAMES.get(name, name), "undefined" if r is None else repr(r))
            )
