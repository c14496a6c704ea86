from datetime import date as Date

import numpy as np
import pytest

from xmove.errors import InsufficientDataError, NormalizationError
from xmove.features import (
    FEATURE_ORDER,
    LabelSpec,
    TASKS,
    build_windows,
    class_distribution,
    make_labels,
    normalize,
    pearson_correlations,
    split_masks,
)
from xmove.indicators import WARMUP_ROWS, compute_indicator_frame
from xmove.market_data import Candle, CandleSeries, align_panel

from conftest import make_asset, make_candles


def _frame(n=80, seed=0):
    candles = make_candles(n, seed=seed)
    eth = make_asset(candles, "ETH", seed=seed + 1)
    gold = make_asset(candles, "GOLD", seed=seed + 2)
    panel = align_panel(candles, eth, gold)
    indicators = compute_indicator_frame(panel)
    return candles, panel, indicators, normalize(panel, indicators)


def test_normalization_against_elementwise_oracle():
    candles, panel, indicators, frame = _frame(120, seed=7)
    offset = WARMUP_ROWS
    raw = {
        "open": panel.column("open"), "high": panel.column("high"),
        "low": panel.column("low"), "close": panel.column("close"),
        "adj_close": panel.column("adj_close"), "volume": panel.column("volume"),
        "eth": panel.eth, "gold": panel.gold,
    }
    for i, day in enumerate(frame.dates):
        t = offset + i + 1          # panel row of this output
        k = i + 1                   # indicator row of this output
        prev_close = panel.column("close")[t - 1]
        for j, name in enumerate(FEATURE_ORDER):
            if name in raw:
                cur, prev_own = raw[name][t], raw[name][t - 1]
            else:
                src = {"eth": "eth_close", "gold": "gold_close"}.get(name, name)
                cur = indicators.column(src)[k]
                prev_own = indicators.column(src)[k - 1]
            if name in ("volume", "eth", "gold"):
                expected = (cur - prev_own) / prev_own
            elif name in ("macd", "sd20", "spread"):
                expected = cur / prev_close
            elif name == "ma_feature":
                expected = cur
            else:
                expected = (cur - prev_close) / prev_close
            assert frame.matrix[i, j] == expected, (day, name)


def test_normalization_point_values():
    # hand-checked single-step values for each rule
    assert (105.0 - 100.0) / 100.0 == 0.05
    assert (200.0 - 160.0) / 160.0 == 0.25
    assert 3.0 / 100.0 == 0.03
    _, _, _, frame = _frame(60, seed=1)
    assert frame.column("ma_feature").tolist() == [
        v for v in frame.column("ma_feature")
    ]  # passthrough stays 0/1
    assert set(np.unique(frame.column("ma_feature"))) <= {0.0, 1.0}


def test_normalize_zero_own_prev_raises():
    candles = make_candles(40, seed=2)
    eth = make_asset(candles, "ETH", seed=3)
    gold = make_asset(candles, "GOLD", seed=4)
    # zero out one volume inside the normalized region
    mutated = [
        Candle(c.date, c.open, c.high, c.low, c.close, c.adj_close,
               0.0 if i == 30 else c.volume)
        for i, c in enumerate(candles)
    ]
    panel = align_panel(CandleSeries(tuple(mutated)), eth, gold)
    indicators = compute_indicator_frame(panel)
    with pytest.raises(NormalizationError, match="volume"):
        normalize(panel, indicators)


def test_windows_shapes_and_counts():
    _, _, _, frame = _frame(80, seed=5)
    samples = build_windows(frame, 5)
    assert len(samples) == len(frame) - 4
    assert all(len(s.x) == 95 for s in samples)
    one = build_windows(frame, 1)
    assert np.array_equal(one[0].x, frame.matrix[0])
    with pytest.raises(InsufficientDataError):
        from xmove.features import FeatureFrame

        tiny = FeatureFrame(dates=frame.dates[:3], matrix=frame.matrix[:3])
        build_windows(tiny, 5)


def test_window_shift_property():
    _, _, _, frame = _frame(70, seed=6)
    samples = build_windows(frame, 5)
    for a, b in zip(samples, samples[1:]):
        assert np.array_equal(a.x[19:], b.x[:76])


def test_labels_up_down_rules():
    candles = CandleSeries(
        (
            Candle(Date(2020, 1, 1), 100.0, 100.0, 100.0, 100.0, 100.0, 1.0),
            Candle(Date(2020, 1, 2), 100.0, 105.2, 99.0, 100.0, 100.0, 1.0),
            Candle(Date(2020, 1, 3), 100.0, 105.0, 97.9, 100.0, 100.0, 1.0),
        )
    )
    up5 = make_labels(candles, LabelSpec("up", 0.05))
    assert up5.dates == (Date(2020, 1, 2), Date(2020, 1, 3))
    assert up5.values.tolist() == [True, False]  # 105.2 > 105 strict; 105.0 not
    down2 = make_labels(candles, LabelSpec("down", 0.02))
    assert down2.values.tolist() == [False, True]  # 99 is -1%; 97.9 is -2.1%


def test_labels_close_source_switch():
    candles = CandleSeries(
        (
            Candle(Date(2020, 1, 1), 100.0, 100.0, 100.0, 100.0, 100.0, 1.0),
            Candle(Date(2020, 1, 2), 100.0, 110.0, 100.0, 103.0, 103.0, 1.0),
        )
    )
    highlow = make_labels(candles, LabelSpec("up", 0.05), source="highlow")
    close_only = make_labels(candles, LabelSpec("up", 0.05), source="close")
    assert highlow.values.tolist() == [True]   # high moved 10%
    assert close_only.values.tolist() == [False]  # close moved 3%


def test_label_thresh_monotonicity(candles_300):
    up2 = make_labels(candles_300, TASKS["up2"])
    up5 = make_labels(candles_300, TASKS["up5"])
    assert set(np.flatnonzero(up5.values)) <= set(np.flatnonzero(up2.values))
    down2 = make_labels(candles_300, TASKS["down2"])
    down5 = make_labels(candles_300, TASKS["down5"])
    assert set(np.flatnonzero(down5.values)) <= set(np.flatnonzero(down2.values))


def test_class_distribution_counts(candles_300):
    labels = make_labels(candles_300, TASKS["up2"])
    stats = class_distribution(labels)
    assert stats.t + stats.f == len(labels)
    # counting oracle on a tiny vector
    from xmove.features import LabelSet

    tiny = LabelSet(
        spec=TASKS["up2"],
        dates=labels.dates[:5],
        values=np.array([True, False, False, False, True]),
    )
    s = class_distribution(tiny)
    assert (s.t, s.f) == (2, 3)
    assert s.true_ratio == pytest.approx(0.4)
    allf = LabelSet(spec=TASKS["up2"], dates=labels.dates[:3], values=np.zeros(3, bool))
    assert class_distribution(allf).true_ratio == 0.0


def test_split_counts_sum_to_whole(candles_300):
    labels = make_labels(candles_300, TASKS["down2"])
    boundary = labels.dates[len(labels) // 2]
    from datetime import timedelta

    train = class_distribution(labels, (None, boundary - timedelta(days=1)))
    test = class_distribution(labels, (boundary, None))
    whole = class_distribution(labels)
    assert train.t + test.t == whole.t
    assert train.f + test.f == whole.f


def test_pearson_self_and_negated():
    _, _, _, frame = _frame(90, seed=9)
    corr = pearson_correlations(frame)
    assert set(corr) == set(FEATURE_ORDER)
    # feature equal to the target: close against next-day close shifted back
    target = frame.column("close")[1:]
    x = frame.column("close")[:-1]
    from xmove.features import _pearson

    assert _pearson(target, target) == pytest.approx(1.0)
    assert _pearson(-target, target) == pytest.approx(-1.0)
    # zero-variance column is flagged undefined
    assert _pearson(np.ones_like(x), target) is None


def test_split_masks():
    dates = tuple(Date(2020, 1, d) for d in range(1, 11))
    train, test = split_masks(dates, Date(2020, 1, 6))
    assert train.sum() == 5 and test.sum() == 5
    assert train[:5].all() and test[5:].all()
