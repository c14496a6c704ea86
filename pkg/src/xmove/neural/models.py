"""The two stack classifiers: parallel multi-height 1-D CNN and a three-layer
2-D CNN with a dense head. Both consume a (batch, n_slices, embed_dim) stack
of per-day slice embeddings and emit 2-class logits.

Default sizes target the reference footprints of roughly 2.6M trainable
parameters for the parallel model and 7.6M for the sequential one; tests use
shrunken specs through the same fields.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ShapeError, ValidationError
from .layers import (
    Conv1d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalMaxPool1d,
    Layer,
    MaxPool2d,
    Parameter,
    ReLU,
)

CHECKPOINT_FORMAT = "stack-cnn"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ParallelCnnSpec:
    n_slices: int = 362
    embed_dim: int = 768
    filter_heights: tuple[int, ...] = (3, 4, 5)
    n_filters: int = 100
    dense_widths: tuple[int, ...] = (2048, 512)
    dropout: float = 0.5

    def __post_init__(self):
        if self.n_slices < max(self.filter_heights):
            raise ConfigError("n_slices must cover the tallest filter")
        if self.n_filters < 1 or self.embed_dim < 1:
            raise ConfigError("n_filters and embed_dim must be >= 1")
        if len(self.dense_widths) != 2:
            raise ConfigError("parallel model uses exactly two dense layers before the head")


@dataclass(frozen=True)
class SequentialCnnSpec:
    n_slices: int = 362
    embed_dim: int = 768
    kernel_sizes: tuple[int, int, int] = (5, 4, 3)
    channels: tuple[int, int, int] = (8, 16, 32)
    pool_sizes: tuple[int, int, int] = (2, 2, 2)
    dense_widths: tuple[int, ...] = (59,)
    dropout: float = 0.5

    def __post_init__(self):
        if len(self.kernel_sizes) != len(self.channels) or len(self.channels) != len(self.pool_sizes):
            raise ConfigError("kernel_sizes, channels and pool_sizes must align")
        if any(k < 1 for k in self.kernel_sizes) or any(c < 1 for c in self.channels):
            raise ConfigError("kernel sizes and channel counts must be >= 1")
        if not self.dense_widths:
            raise ConfigError("sequential model needs at least one dense layer before the head")


class _StackModel:
    """Shared plumbing: an ordered layer list with branch-free backward."""

    spec: ParallelCnnSpec | SequentialCnnSpec
    dtype: np.dtype

    def params(self) -> list[Parameter]:
        return [p for layer in self._all_layers() for p in layer.params()]

    def n_params(self) -> int:
        return sum(p.value.size for p in self.params())

    def zero_grad(self) -> None:
        for p in self.params():
            p.grad[...] = 0.0

    def get_weights(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.params()]

    def set_weights(self, weights: list[np.ndarray]) -> None:
        params = self.params()
        if len(weights) != len(params):
            raise ShapeError(f"expected {len(params)} arrays, got {len(weights)}")
        for p, w in zip(params, weights):
            if p.value.shape != w.shape:
                raise ShapeError(f"weight shape {w.shape} does not match {p.value.shape}")
            p.value[...] = w

    def _all_layers(self) -> list[Layer]:
        raise NotImplementedError

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1] != self.spec.n_slices or x.shape[2] != self.spec.embed_dim:
            raise ShapeError(
                f"expected (*, {self.spec.n_slices}, {self.spec.embed_dim}) stacks, got {x.shape}"
            )
        return x


class ParallelCnn(_StackModel):
    """Per-height 1-D convolution branches, global max pool, dense head."""

    arch = "parallel"

    def __init__(self, spec: ParallelCnnSpec, seed: int = 0, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.branches = [
            (Conv1d(h, spec.embed_dim, spec.n_filters, rng, self.dtype), ReLU(), GlobalMaxPool1d())
            for h in spec.filter_heights
        ]
        pooled = spec.n_filters * len(spec.filter_heights)
        d1, d2 = spec.dense_widths
        self.dense1 = Dense(pooled, d1, rng, self.dtype)
        self.relu1 = ReLU()
        self.drop = Dropout(spec.dropout, np.random.default_rng(seed + 1))
        self.dense2 = Dense(d1, d2, rng, self.dtype)
        self.relu2 = ReLU()
        self.head = Dense(d2, 2, rng, self.dtype)

    def _all_layers(self):
        layers: list[Layer] = []
        for conv, relu, pool in self.branches:
            layers += [conv, relu, pool]
        layers += [self.dense1, self.relu1, self.drop, self.dense2, self.relu2, self.head]
        return layers

    def forward(self, x, train: bool = False) -> np.ndarray:
        x = self._check_input(x)
        pooled = []
        for conv, relu, pool in self.branches:
            pooled.append(pool.forward(relu.forward(conv.forward(x, train), train), train))
        h = np.concatenate(pooled, axis=1)
        h = self.drop.forward(self.relu1.forward(self.dense1.forward(h, train), train), train)
        h = self.relu2.forward(self.dense2.forward(h, train), train)
        return self.head.forward(h, train)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        d = self.head.backward(dlogits)
        d = self.dense2.backward(self.relu2.backward(d))
        d = self.dense1.backward(self.relu1.backward(self.drop.backward(d)))
        f = self.spec.n_filters
        dx = None
        for idx, (conv, relu, pool) in enumerate(self.branches):
            dpart = pool.backward(d[:, idx * f : (idx + 1) * f])
            dbranch = conv.backward(relu.backward(dpart))
            dx = dbranch if dx is None else dx + dbranch
        return dx


class SequentialCnn(_StackModel):
    """Stacked 2-D convolutions over the (slices x embed_dim) plane."""

    arch = "sequential"

    def __init__(self, spec: SequentialCnnSpec, seed: int = 0, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.blocks: list[tuple[Conv2d, ReLU, MaxPool2d]] = []
        h, w, c_in = spec.n_slices, spec.embed_dim, 1
        for k, c_out, pool in zip(spec.kernel_sizes, spec.channels, spec.pool_sizes):
            if h < k or w < k:
                raise ConfigError(f"feature map {h}x{w} smaller than kernel {k}x{k}")
            self.blocks.append((Conv2d(k, c_in, c_out, rng, self.dtype), ReLU(), MaxPool2d(pool)))
            h, w = h - k + 1, w - k + 1
            if pool > 1:
                h, w = h // pool, w // pool
                if h < 1 or w < 1:
                    raise ConfigError("pooling collapsed the feature map to nothing")
            c_in = c_out
        self.flatten = Flatten()
        flat = h * w * c_in
        self.dense_layers: list[tuple[Dense, ReLU]] = []
        n_in = flat
        for width in spec.dense_widths:
            self.dense_layers.append((Dense(n_in, width, rng, self.dtype), ReLU()))
            n_in = width
        self.drop = Dropout(spec.dropout, np.random.default_rng(seed + 1))
        self.head = Dense(n_in, 2, rng, self.dtype)

    def _all_layers(self):
        layers: list[Layer] = []
        for conv, relu, pool in self.blocks:
            layers += [conv, relu, pool]
        layers.append(self.flatten)
        for i, (dense, relu) in enumerate(self.dense_layers):
            layers += [dense, relu]
            if i == 0:
                layers.append(self.drop)
        layers.append(self.head)
        return layers

    def forward(self, x, train: bool = False) -> np.ndarray:
        x = self._check_input(x)[..., None]  # single input channel
        for conv, relu, pool in self.blocks:
            x = pool.forward(relu.forward(conv.forward(x, train), train), train)
        x = self.flatten.forward(x, train)
        for i, (dense, relu) in enumerate(self.dense_layers):
            x = relu.forward(dense.forward(x, train), train)
            if i == 0:
                x = self.drop.forward(x, train)
        return self.head.forward(x, train)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        d = self.head.backward(dlogits)
        for i in range(len(self.dense_layers) - 1, -1, -1):
            dense, relu = self.dense_layers[i]
            if i == 0:
                d = self.drop.backward(d)
            d = dense.backward(relu.backward(d))
        d = self.flatten.backward(d)
        for conv, relu, pool in reversed(self.blocks):
            d = conv.backward(relu.backward(pool.backward(d)))
        return d[..., 0]


def _spec_to_meta(model) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "dtype": model.dtype.name,
        "spec": asdict(model.spec),
    }


def build_model(arch: str, spec_fields: dict, seed: int = 0, dtype=np.float64):
    fields = dict(spec_fields)
    for key, value in fields.items():
        if isinstance(value, list):
            fields[key] = tuple(value)
    if arch == "parallel":
        return ParallelCnn(ParallelCnnSpec(**fields), seed=seed, dtype=dtype)
    if arch == "sequential":
        return SequentialCnn(SequentialCnnSpec(**fields), seed=seed, dtype=dtype)
    raise ConfigError(f"unknown architecture {arch!r}")


def save_checkpoint(model, path: str | Path) -> None:
    arrays = {f"param_{i}": p.value for i, p in enumerate(model.params())}
    with open(path, "wb") as fh:
        np.savez(fh, meta=json.dumps(_spec_to_meta(model), sort_keys=True), **arrays)


def load_checkpoint(path: str | Path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
        model = build_model(meta["arch"], meta["spec"], dtype=np.dtype(meta["dtype"]))
        weights = [data[f"param_{i}"] for i in range(len(model.params()))]
    model.set_weights(weights)
    return model
