"""Adam with bias correction and optional L2 via the gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from .layers import Parameter


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must be in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be >= 0")


def adam_step(
    value: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    cfg: AdamConfig,
) -> np.ndarray:
    """One in-place update of `value`; moments m/v updated in place too.

    L2 enters as grad + weight_decay * value before the moment update; t is
    the 1-based step count used for bias correction.
    """
    if not (value.shape == grad.shape == m.shape == v.shape):
        raise ShapeError("adam_step arrays must share one shape")
    g = grad + cfg.weight_decay * value if cfg.weight_decay else grad
    m *= cfg.beta1
    m += (1.0 - cfg.beta1) * g
    v *= cfg.beta2
    v += (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    value -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return value


class Adam:
    """Optimizer over a parameter list; zeroes gradients after each step."""

    def __init__(self, params: list[Parameter], cfg: AdamConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in params]
        self._v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            adam_step(p.value, p.grad, m, v, self.t, self.cfg)
            p.grad[...] = 0.0
