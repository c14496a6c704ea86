"""Training loop with a 9:1 train/validation split and early stopping on
validation F1. Deterministic for a fixed seed: the split, batch order,
dropout masks and weight init all derive from it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, TrainingError
from .losses import FocalLossParams, loss_on_logits, softmax
from .optim import Adam, AdamConfig


@dataclass(frozen=True)
class TrainConfig:
    optimizer: AdamConfig = field(default_factory=AdamConfig)
    loss: str = "bce"  # "bce" | "focal"
    focal: FocalLossParams | None = None
    epochs: int = 50
    batch_size: int = 32
    patience: int = 5
    val_fraction: float = 0.1
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_f1: float


@dataclass
class TrainResult:
    model: object
    history: list[EpochStats]
    best_epoch: int
    best_val_f1: float
    val_indices: np.ndarray  # into the dataset passed to train()


def _f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(np.count_nonzero(y_true & y_pred))
    fp = int(np.count_nonzero(~y_true & y_pred))
    fn = int(np.count_nonzero(y_true & ~y_pred))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def predict_proba_nn(model, stacks: np.ndarray) -> np.ndarray:
    """Positive-class softmax probability for one stack or a batch."""
    single = np.asarray(stacks).ndim == 2
    logits = model.forward(stacks, train=False)
    probs = softmax(logits)[:, 1]
    return float(probs[0]) if single else probs


def train(model, stacks: np.ndarray, labels, cfg: TrainConfig) -> TrainResult:
    """Fit `model` on (stacks, labels); returns the best-validation snapshot.

    The dataset is split 9:1 (shuffled by seed); after each epoch the
    validation F1 at the 0.5 threshold is scored and the best weights are
    kept. Training stops after `patience` epochs without improvement.
    """
    x = np.asarray(stacks)
    y = np.asarray(labels, dtype=bool)
    if len(x) != len(y):
        raise TrainingError(f"{len(x)} stacks but {len(y)} labels")
    if len(x) < 2:
        raise TrainingError("need at least 2 samples")
    if y.all() or not y.any():
        raise TrainingError("training data contains a single class")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(x))
    n_val = max(1, int(round(len(x) * cfg.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if y[train_idx].all() or not y[train_idx].any():
        raise TrainingError("training split contains a single class after the validation cut")

    optimizer = Adam(model.params(), cfg.optimizer)
    best_weights = model.get_weights()
    best_f1 = -1.0
    best_epoch = 0
    stale = 0
    history: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        perm = train_idx[rng.permutation(len(train_idx))]
        losses = []
        for start in range(0, len(perm), cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            logits = model.forward(x[batch], train=True)
            loss, dlogits = loss_on_logits(logits, y[batch], cfg.loss, cfg.focal)
            model.backward(dlogits)
            optimizer.step()
            losses.append(loss)
        val_probs = predict_proba_nn(model, x[val_idx])
        val_f1 = _f1(y[val_idx], val_probs > cfg.threshold)
        history.append(EpochStats(epoch=epoch, train_loss=float(np.mean(losses)), val_f1=val_f1))
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_weights = model.get_weights()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.set_weights(best_weights)
    return TrainResult(
        model=model,
        history=history,
        best_epoch=best_epoch,
        best_val_f1=best_f1,
        val_indices=np.sort(val_idx),
    )
