"""Softmax head with binary cross-entropy and focal losses.

Both losses act on the positive-class probability p (clamped away from 0/1)
with p_t = p for positive targets and 1-p otherwise. The focal loss scales
the log term by alpha_t * (1 - p_t)^gamma where alpha_t = alpha for positives
and 1-alpha for negatives; alpha=None disables the class weighting, and
gamma=0 with weighting disabled reduces exactly to BCE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError

PROB_EPS = 1e-7


@dataclass(frozen=True)
class FocalLossParams:
    alpha: float | None = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("focal alpha must be in [0, 1] or None")
        if self.gamma < 0:
            raise ConfigError("focal gamma must be >= 0")


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _p_t(p, t):
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=bool)
    return np.clip(np.where(t, p, 1.0 - p), PROB_EPS, 1.0 - PROB_EPS)


def bce_loss(p, t):
    """-log(p_t) per sample; scalar in, scalar out."""
    out = -np.log(_p_t(p, t))
    return float(out) if out.ndim == 0 else out


def focal_loss(p, t, params: FocalLossParams):
    """-alpha_t * (1 - p_t)^gamma * log(p_t) per sample."""
    pt = _p_t(p, t)
    tb = np.asarray(t, dtype=bool)
    if params.alpha is None:
        alpha_t = 1.0
    else:
        alpha_t = np.where(tb, params.alpha, 1.0 - params.alpha)
    out = -alpha_t * (1.0 - pt) ** params.gamma * np.log(pt)
    return float(out) if out.ndim == 0 else out


def _dloss_dp(p, t, kind: str, params: FocalLossParams | None):
    """Derivative of the per-sample loss w.r.t. the raw positive probability.

    Zero where the clamp is active (matches the piecewise-constant loss there).
    """
    p = np.asarray(p, dtype=float)
    tb = np.asarray(t, dtype=bool)
    pt_raw = np.where(tb, p, 1.0 - p)
    active = (pt_raw > PROB_EPS) & (pt_raw < 1.0 - PROB_EPS)
    pt = np.clip(pt_raw, PROB_EPS, 1.0 - PROB_EPS)
    if kind == "bce":
        dpt = -1.0 / pt
    else:
        g = params.gamma
        if params.alpha is None:
            alpha_t = 1.0
        else:
            alpha_t = np.where(tb, params.alpha, 1.0 - params.alpha)
        one_m = 1.0 - pt
        if g == 0.0:
            dpt = -alpha_t / pt
        else:
            dpt = alpha_t * (g * one_m ** (g - 1.0) * np.log(pt) - one_m**g / pt)
    dpt = np.where(active, dpt, 0.0)
    return np.where(tb, dpt, -dpt)  # chain through p_t = p or 1-p


def loss_on_logits(
    logits: np.ndarray,
    targets,
    kind: str = "bce",
    params: FocalLossParams | None = None,
) -> tuple[float, np.ndarray]:
    """Mean loss over a batch of 2-class logits, plus d(loss)/d(logits)."""
    if kind not in ("bce", "focal"):
        raise ConfigError(f"unknown loss {kind!r}")
    if kind == "focal" and params is None:
        raise ConfigError("focal loss requires FocalLossParams")
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ShapeError(f"expected (batch, 2) logits, got {logits.shape}")
    t = np.asarray(targets, dtype=bool)
    if len(t) != len(logits):
        raise ShapeError(f"{len(logits)} logit rows but {len(t)} targets")

    probs = softmax(logits)
    p = probs[:, 1]
    losses = bce_loss(p, t) if kind == "bce" else focal_loss(p, t, params)
    dp = _dloss_dp(p, t, kind, params) / len(t)
    # dp1/dz1 = p1(1-p1), dp1/dz0 = -p1(1-p1)
    dz1 = dp * p * (1.0 - p)
    dlogits = np.stack([-dz1, dz1], axis=1)
    return float(np.mean(losses)), dlogits
