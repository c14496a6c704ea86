"""Minimal CPU neural-network engine for the tweet-embedding classifiers.

Plain numpy forward/backward layers (1-D and 2-D valid convolution, max
pooling, dense, ReLU, dropout), softmax with BCE or focal loss, an Adam
optimizer, and the two stack-classifier architectures built from them.
"""

from .layers import Parameter
from .losses import FocalLossParams, bce_loss, focal_loss
from .models import ParallelCnn, ParallelCnnSpec, SequentialCnn, SequentialCnnSpec
from .optim import AdamConfig
from .training import TrainConfig, TrainResult, predict_proba_nn, train

__all__ = [
    "AdamConfig",
    "FocalLossParams",
    "ParallelCnn",
    "ParallelCnnSpec",
    "Parameter",
    "SequentialCnn",
    "SequentialCnnSpec",
    "TrainConfig",
    "TrainResult",
    "bce_loss",
    "focal_loss",
    "predict_proba_nn",
    "train",
]
