"""Fusion of the two base-model probabilities, plus classification metrics.

The fusion classifier sees a 2-vector (tweet-model probability, TA-model
probability) per day and is either a small kernel SVM over those pairs or a
regularized logistic regression. Threshold sweeps re-score fixed
probabilities at several cutoffs without touching model state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError, TrainingError, ValidationError
from .svm import SvmModel, decision_batch, _sigmoid

DEFAULT_TAUS = (0.5, 0.95, 0.99)


def build_fusion_input(p_twitter: float, p_ta: float) -> np.ndarray:
    """Ordered probability pair [twitter, ta]."""
    for name, p in (("twitter", p_twitter), ("ta", p_ta)):
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"{name} probability {p} outside [0, 1]")
    return np.array([p_twitter, p_ta], dtype=float)


@dataclass
class Logistic:
    """sigmoid(w . x + b) over probability pairs."""

    w: np.ndarray
    b: float


def fit_logistic(pairs, labels, l2: float = 1e-4, max_iter: int = 100) -> Logistic:
    """Damped-Newton fit of an L2-regularized logistic regression.

    The intercept is unregularized, so with overwhelming l2 the prediction
    collapses to the class prior. Deterministic given the data.
    """
    x = np.asarray(pairs, dtype=float)
    y = np.asarray(labels, dtype=bool).astype(float)
    if x.ndim != 2:
        raise ShapeError(f"pairs must be 2-D, got shape {x.shape}")
    if len(x) != len(y):
        raise ShapeError(f"{len(x)} pairs but {len(y)} labels")
    if l2 < 0:
        raise ConfigError("l2 must be >= 0")
    if y.all() or not y.any():
        raise TrainingError("logistic fit needs both classes")

    n, d = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    reg = np.zeros(d + 1)
    reg[:d] = l2
    theta = np.zeros(d + 1)

    def objective(t):
        z = xb @ t
        # log(1 + exp(z)) - y*z, computed stably
        return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * np.sum(reg * t * t))

    obj = objective(theta)
    for _ in range(max_iter):
        p = _sigmoid(xb @ theta)
        grad = xb.T @ (p - y) + reg * theta
        if np.linalg.norm(grad) < 1e-10:
            break
        s = np.maximum(p * (1.0 - p), 1e-12)
        hess = (xb * s[:, None]).T @ xb + np.diag(np.maximum(reg, 1e-12))
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(40):
            candidate = theta - scale * step
            cand_obj = objective(candidate)
            if cand_obj <= obj:
                theta, obj = candidate, cand_obj
                break
            scale *= 0.5
        else:
            break
    return Logistic(w=theta[:d].copy(), b=float(theta[d]))


def fusion_predict_proba(model, pair) -> float:
    pair = np.asarray(pair, dtype=float)
    return float(fusion_predict_proba_batch(model, pair[None, :])[0])


def fusion_predict_proba_batch(model, pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=float)
    if isinstance(model, Logistic):
        return _sigmoid(pairs @ model.w + model.b)
    if isinstance(model, SvmModel):
        return _sigmoid(decision_batch(model, pairs))
    raise ConfigError(f"unknown fusion model type {type(model).__name__}")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def positives_predicted(self) -> int:
        return self.tp + self.fp

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    pos: ClassMetrics
    neg: ClassMetrics
    weighted_f1: float
    accuracy: float
    degenerate: tuple[str, ...]  # metric names that hit a 0/0 denominator

    def as_dict(self) -> dict:
        return {
            "precision": {"T": self.pos.precision, "F": self.neg.precision},
            "recall": {"T": self.pos.recall, "F": self.neg.recall},
            "f1": {"T": self.pos.f1, "F": self.neg.f1, "weighted": self.weighted_f1},
            "accuracy": self.accuracy,
            "support": {"T": self.pos.support, "F": self.neg.support},
            "degenerate": list(self.degenerate),
        }


@dataclass(frozen=True)
class ThresholdSweep:
    taus: tuple[float, ...]
    matrices: tuple[ConfusionMatrix, ...]
    reports: tuple[ClassificationReport, ...]


def apply_threshold(probs, tau: float) -> np.ndarray:
    """Positive iff probability strictly exceeds tau."""
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"threshold {tau} outside (0, 1)")
    return np.asarray(probs, dtype=float) > tau


def confusion(preds, labels) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    if preds.shape != labels.shape:
        raise ShapeError(f"predictions {preds.shape} vs labels {labels.shape}")
    return ConfusionMatrix(
        tp=int(np.count_nonzero(preds & labels)),
        fp=int(np.count_nonzero(preds & ~labels)),
        fn=int(np.count_nonzero(~preds & labels)),
        tn=int(np.count_nonzero(~preds & ~labels)),
    )


def _prf(tp: int, fp: int, fn: int, degenerate: list[str], tag: str) -> ClassMetrics:
    if tp + fp == 0:
        precision = 0.0
        degenerate.append(f"precision_{tag}")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        degenerate.append(f"recall_{tag}")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
        degenerate.append(f"f1_{tag}")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision=precision, recall=recall, f1=f1, support=tp + fn)


def report(cm: ConfusionMatrix) -> ClassificationReport:
    if cm.total == 0:
        raise ValidationError("cannot report on zero samples")
    degenerate: list[str] = []
    pos = _prf(cm.tp, cm.fp, cm.fn, degenerate, "T")
    neg = _prf(cm.tn, cm.fn, cm.fp, degenerate, "F")
    weighted = (
        (pos.f1 * pos.support + neg.f1 * neg.support) / (pos.support + neg.support)
    )
    return ClassificationReport(
        pos=pos,
        neg=neg,
        weighted_f1=weighted,
        accuracy=(cm.tp + cm.tn) / cm.total,
        degenerate=tuple(degenerate),
    )


def sweep_thresholds(probs, labels, taus=DEFAULT_TAUS) -> ThresholdSweep:
    """Confusion matrix and report per tau; taus must be sorted ascending."""
    taus = tuple(float(t) for t in taus)
    if list(taus) != sorted(taus):
        raise ValidationError(f"thresholds must be sorted ascending, got {taus}")
    probs = np.asarray(probs, dtype=float)
    matrices = []
    reports = []
    prev_positive = None
    for tau in taus:
        cm = confusion(apply_threshold(probs, tau), labels)
        if prev_positive is not None and cm.positives_predicted > prev_positive:
            raise ValidationError("positive predictions increased with the threshold")
        prev_positive = cm.positives_predicted
        matrices.append(cm)
        reports.append(report(cm))
    return ThresholdSweep(taus=taus, matrices=tuple(matrices), reports=tuple(reports))


def report_table(rows: list[tuple[str, ClassificationReport, str]]) -> str:
    """Aligned text table: one row per model with its parameter note."""
    header = (
        f"{'Model':<28} {'P(T)':>6} {'P(F)':>6} {'R(T)':>6} {'R(F)':>6} "
        f"{'F1(T)':>6} {'F1(F)':>6} {'F1(W)':>6} {'Acc%':>7}  Parameters"
    )
    lines = [header, "-" * len(header)]
    for name, rep, params in rows:
        lines.append(
            f"{name:<28} {rep.pos.precision:>6.2f} {rep.neg.precision:>6.2f} "
            f"{rep.pos.recall:>6.2f} {rep.neg.recall:>6.2f} "
            f"{rep.pos.f1:>6.2f} {rep.neg.f1:>6.2f} {rep.weighted_f1:>6.2f} "
            f"{rep.accuracy * 100:>7.2f}  {params}"
        )
    return "\n".join(lines) + "\n"


def save_fusion_model(model, path: str | Path, meta: dict | None = None) -> None:
    if isinstance(model, Logistic):
        payload = {
            "format": "fusion-logistic",
            "version": 1,
            "w": model.w.tolist(),
            "b": model.b,
        }
    elif isinstance(model, SvmModel):
        payload = {
            "format": "fusion-svm",
            "version": 1,
            "kernel": {
                "kind": model.kernel.kind,
                "gamma": model.kernel.gamma,
                "degree": model.kernel.degree,
                "coef0": model.kernel.coef0,
            },
            "bias": model.bias,
            "dual_coefs": model.dual_coefs.tolist(),
            "support_vectors": model.support_vectors.tolist(),
        }
    else:
        raise ConfigError(f"unknown fusion model type {type(model).__name__}")
    payload["meta"] = meta or {}
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_fusion_model(path: str | Path):
    from .svm import KernelSpec  # local import to keep module load light

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    fmt = payload.get("format")
    if fmt == "fusion-logistic":
        return Logistic(w=np.array(payload["w"], dtype=float), b=float(payload["b"])), payload["meta"]
    if fmt == "fusion-svm":
        kern = payload["kernel"]
        model = SvmModel(
            support_vectors=np.array(payload["support_vectors"], dtype=float).reshape(
                len(payload["dual_coefs"]), -1
            ),
            dual_coefs=np.array(payload["dual_coefs"], dtype=float),
            bias=float(payload["bias"]),
            kernel=KernelSpec(
                kind=kern["kind"], gamma=kern["gamma"],
                degree=int(kern["degree"]), coef0=float(kern["coef0"]),
            ),
        )
        return model, payload["meta"]
    raise ValidationError(f"{path}: unknown fusion model format {fmt!r}")
