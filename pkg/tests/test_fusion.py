import numpy as np
import pytest

from xmove.errors import ShapeError, TrainingError, ValidationError
from xmove.fusion import (
    ConfusionMatrix,
    Logistic,
    apply_threshold,
    build_fusion_input,
    confusion,
    fit_logistic,
    fusion_predict_proba,
    fusion_predict_proba_batch,
    load_fusion_model,
    report,
    report_table,
    save_fusion_model,
    sweep_thresholds,
)
from xmove.svm import KernelSpec, SvmParams, predict_proba_batch, train_smo


def test_build_fusion_input():
    assert build_fusion_input(0.7, 0.4).tolist() == [0.7, 0.4]
    assert build_fusion_input(0.0, 1.0).tolist() == [0.0, 1.0]
    with pytest.raises(ValidationError):
        build_fusion_input(1.2, 0.4)
    with pytest.raises(ValidationError):
        build_fusion_input(0.5, -0.1)


def pair_data(n=120, seed=0, separation=4.0):
    rng = np.random.default_rng(seed)
    y = rng.random(n) > 0.5
    base = np.where(y, 0.75, 0.25)
    pairs = np.clip(
        np.column_stack([base, base]) + rng.normal(scale=0.05, size=(n, 2)), 0, 1
    )
    return pairs, y


def test_logistic_separable_reaches_full_accuracy():
    pairs, y = pair_data(seed=1)
    model = fit_logistic(pairs, y, l2=1e-8)
    preds = fusion_predict_proba_batch(model, pairs) > 0.5
    assert (preds == y).mean() == 1.0


def test_logistic_strong_l2_collapses_to_prior():
    rng = np.random.default_rng(2)
    pairs = rng.random((400, 2))
    y = rng.random(400) > 0.3  # labels independent of inputs
    model = fit_logistic(pairs, y, l2=1e6)
    assert np.abs(model.w).max() < 1e-3
    prior = y.mean()
    probs = fusion_predict_proba_batch(model, pairs)
    assert np.abs(probs - prior).max() < 0.01


def test_logistic_symmetry_gives_zero_bias():
    rng = np.random.default_rng(3)
    half = rng.normal(size=(50, 2))
    pairs = np.vstack([half, -half])
    y = np.array([True] * 50 + [False] * 50)
    model = fit_logistic(pairs, y, l2=1e-3)
    assert abs(model.b) < 1e-6


def test_logistic_single_class_rejected():
    pairs, _ = pair_data(30, seed=4)
    with pytest.raises(TrainingError):
        fit_logistic(pairs, np.ones(len(pairs), dtype=bool))


def test_fusion_predict_values():
    flat = Logistic(w=np.zeros(2), b=0.0)
    assert fusion_predict_proba(flat, [0.3, 0.9]) == 0.5
    ones = Logistic(w=np.ones(2), b=0.0)
    assert fusion_predict_proba(ones, [0.0, 0.0]) == 0.5


def test_fusion_svm_variant_matches_svm_module():
    pairs, y = pair_data(80, seed=5)
    model = train_smo(pairs, y, SvmParams(c=10.0, kernel=KernelSpec("rbf", gamma=1.0)))
    via_fusion = fusion_predict_proba_batch(model, pairs)
    via_svm = predict_proba_batch(model, pairs)
    assert np.array_equal(via_fusion, via_svm)


def test_apply_threshold_strictness():
    probs = [0.2, 0.6, 0.96, 0.995]
    assert apply_threshold(probs, 0.95).tolist() == [False, False, True, True]
    assert apply_threshold(probs, 0.99).tolist() == [False, False, False, True]
    assert apply_threshold([0.5, 0.50001], 0.5).tolist() == [False, True]
    with pytest.raises(ValidationError):
        apply_threshold(probs, 1.0)


def test_confusion_counts():
    labels = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], dtype=bool)
    preds = np.array([1, 1, 0, 1, 0, 0, 0, 0, 0, 0], dtype=bool)
    cm = confusion(preds, labels)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (2, 1, 1, 6)
    eq = confusion(labels, labels)
    assert eq.fp == eq.fn == 0
    inv = confusion(~labels, labels)
    assert inv.tp == inv.tn == 0
    with pytest.raises(ShapeError):
        confusion(preds[:5], labels)


def test_report_values_and_degenerate():
    cm = ConfusionMatrix(tp=2, fp=1, fn=1, tn=6)
    rep = report(cm)
    assert rep.pos.precision == pytest.approx(2 / 3)
    assert rep.pos.recall == pytest.approx(2 / 3)
    assert rep.pos.f1 == pytest.approx(2 / 3)
    assert rep.accuracy == pytest.approx(0.8)
    assert min(rep.pos.f1, rep.neg.f1) <= rep.weighted_f1 <= max(rep.pos.f1, rep.neg.f1)

    perfect = report(confusion(np.ones(5, bool), np.ones(5, bool)))
    assert perfect.pos.f1 == perfect.accuracy == 1.0

    none_predicted = report(ConfusionMatrix(tp=0, fp=0, fn=3, tn=7))
    assert none_predicted.pos.precision == 0.0
    assert none_predicted.pos.recall == 0.0
    assert "precision_T" in none_predicted.degenerate


def test_report_identity_accuracy_property():
    rng = np.random.default_rng(6)
    for _ in range(20):
        labels = rng.random(30) > rng.random()
        rep = report(confusion(labels, labels))
        assert rep.accuracy == 1.0


def test_sweep_monotonicity_and_composition():
    rng = np.random.default_rng(7)
    probs = rng.random(200)
    labels = probs + rng.normal(scale=0.2, size=200) > 0.5
    sweep = sweep_thresholds(probs, labels, (0.5, 0.95, 0.99))
    counts = [cm.positives_predicted for cm in sweep.matrices]
    assert counts == sorted(counts, reverse=True)
    # composition: a single-tau sweep equals apply_threshold + confusion
    single = sweep_thresholds(probs, labels, (0.95,))
    direct = confusion(apply_threshold(probs, 0.95), labels)
    assert single.matrices[0] == direct
    # subset property
    pos95 = set(np.flatnonzero(apply_threshold(probs, 0.95)))
    pos99 = set(np.flatnonzero(apply_threshold(probs, 0.99)))
    assert pos99 <= pos95
    with pytest.raises(ValidationError):
        sweep_thresholds(probs, labels, (0.99, 0.5))


def test_sweep_above_max_prob_gives_zero_positives():
    probs = np.full(10, 0.4)
    labels = np.zeros(10, dtype=bool)
    labels[0] = True
    sweep = sweep_thresholds(probs, labels, (0.5, 0.95))
    assert sweep.matrices[-1].positives_predicted == 0


def test_precision_non_decreasing_on_monotone_fixture():
    # fixture built so that higher-probability samples are true positives
    probs = np.linspace(0.05, 0.99, 40)
    labels = probs > 0.4
    last_precision = 0.0
    for tau in (0.5, 0.7, 0.9):
        cm = confusion(apply_threshold(probs, tau), labels)
        if cm.tp > 0:
            rep = report(cm)
            assert rep.pos.precision >= last_precision
            last_precision = rep.pos.precision


def test_report_table_renders():
    rep = report(ConfusionMatrix(tp=2, fp=1, fn=1, tn=6))
    text = report_table([("model-a", rep, "tau=0.5")])
    assert "model-a" in text and "Parameters" in text


def test_fusion_model_roundtrip(tmp_path):
    pairs, y = pair_data(60, seed=8)
    logistic = fit_logistic(pairs, y)
    p1 = tmp_path / "logistic.json"
    save_fusion_model(logistic, p1, meta={"task": "up5"})
    again, meta = load_fusion_model(p1)
    assert meta["task"] == "up5"
    assert np.array_equal(again.w, logistic.w) and again.b == logistic.b

    svm_model = train_smo(pairs, y, SvmParams(c=5.0, kernel=KernelSpec("poly", gamma=1.0)))
    p2 = tmp_path / "svm.json"
    save_fusion_model(svm_model, p2, meta={})
    again2, _ = load_fusion_model(p2)
    probs1 = fusion_predict_proba_batch(svm_model, pairs)
    probs2 = fusion_predict_proba_batch(again2, pairs)
    assert np.abs(probs1 - probs2).max() <= 1e-12
