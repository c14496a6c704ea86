"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import csv
from datetime import date as Date, timedelta
from pathlib import Path

import numpy as np
import pytest

from xmove.embeddings import EmbeddingStack
from xmove.market_data import AssetSeries, Candle, CandleSeries


def make_candles(n: int, seed: int = 0, start: Date = Date(2019, 1, 1),
                 start_price: float = 100.0) -> CandleSeries:
    """Geometric random walk with valid OHLC relations and positive volume."""
    rng = np.random.default_rng(seed)
    close = start_price
    candles = []
    day = start
    for _ in range(n):
        opn = close
        close = opn * float(np.exp(rng.normal(0.0, 0.02)))
        wiggle_hi = 1.0 + abs(float(rng.normal(0.0, 0.01)))
        wiggle_lo = 1.0 - abs(float(rng.normal(0.0, 0.01)))
        high = max(opn, close) * wiggle_hi
        low = min(opn, close) * wiggle_lo
        volume = float(rng.uniform(1e3, 1e5))
        candles.append(
            Candle(date=day, open=opn, high=high, low=low, close=close,
                   adj_close=close, volume=volume)
        )
        day += timedelta(days=1)
    return CandleSeries(tuple(candles))


def make_asset(candles: CandleSeries, asset_id: str, seed: int = 1,
               skip_weekends: bool = False) -> AssetSeries:
    rng = np.random.default_rng(seed)
    dates, closes = [], []
    price = 50.0
    for d in candles.dates:
        price *= float(np.exp(rng.normal(0.0, 0.015)))
        if skip_weekends and d.weekday() >= 5:
            continue
        dates.append(d)
        closes.append(price)
    return AssetSeries(asset_id=asset_id, dates=tuple(dates), closes=tuple(closes))


def write_candles_csv(path: Path, candles: CandleSeries, with_adj: bool = True) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if with_adj:
            writer.writerow(("date", "open", "high", "low", "close", "adj_close", "volume"))
        else:
            writer.writerow(("date", "open", "high", "low", "close", "volume"))
        for c in candles:
            row = [c.date.isoformat(), c.open, c.high, c.low, c.close]
            if with_adj:
                row.append(c.adj_close)
            row.append(c.volume)
            writer.writerow(row)
    return path


def write_asset_csv(path: Path, series: AssetSeries) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("date", "close"))
        for d, p in zip(series.dates, series.closes):
            writer.writerow((d.isoformat(), p))
    return path


def make_stacks(dates, seed: int = 0, max_slices: int = 6, dim: int = 768):
    """Random float32 stacks with 1..max_slices rows per day."""
    rng = np.random.default_rng(seed)
    stacks = []
    for d in dates:
        n = int(rng.integers(1, max_slices + 1))
        stacks.append(
            EmbeddingStack(date=d, matrix=rng.normal(size=(n, dim)).astype(np.float32))
        )
    return stacks


@pytest.fixture
def candles_300() -> CandleSeries:
    return make_candles(300, seed=42)


TOY_CONFIG = """\
[data]
btc = {btc}
eth = {eth}
gold = {gold}
embeddings = {emb}

[run]
seed = {seed}
output_dir = {out}
task = up2
split_date = {split}

[svm]
c_grid = 1,10
gamma_grid = 0.1,1
folds = 4
max_passes = 20000

[neural]
max_slices = 26
parallel_filters = 2
parallel_dense = 8,4
seq_channels = 2,3,4
seq_dense = 6
epochs = 2
batch_size = 32
patience = 2
dtype = float64

[fusion]
model = logistic
mode = out-of-fold
twitter_arch = parallel
"""


def build_toy_workspace(root: Path, n_days: int = 300, seed: int = 42,
                        split_index: int = 240, config_seed: int = 7) -> dict:
    """Full on-disk toy dataset: market CSVs, an embedding file, and a config."""
    from xmove.embeddings import write_embedding_file

    root.mkdir(parents=True, exist_ok=True)
    candles = make_candles(n_days, seed=seed, start=Date(2019, 6, 3))  # a Monday
    eth = make_asset(candles, "ETH", seed=seed + 1, skip_weekends=False)
    gold = make_asset(candles, "GOLD", seed=seed + 2, skip_weekends=True)
    paths = {
        "btc": write_candles_csv(root / "btc.csv", candles),
        "eth": write_asset_csv(root / "eth.csv", eth),
        "gold": write_asset_csv(root / "gold.csv", gold),
        "emb": root / "embeddings.pbem",
        "out": root / "out",
    }
    stacks = make_stacks(candles.dates, seed=seed + 3, max_slices=4)
    write_embedding_file(stacks, paths["emb"], max_slices=26)
    split = candles.dates[split_index]
    cfg_path = root / "toy.ini"
    cfg_path.write_text(
        TOY_CONFIG.format(
            btc=paths["btc"], eth=paths["eth"], gold=paths["gold"],
            emb=paths["emb"], out=paths["out"], split=split.isoformat(),
            seed=config_seed,
        )
    )
    paths["config"] = cfg_path
    paths["candles"] = candles
    paths["split"] = split
    return paths
