"""Forward/backward layers over numpy arrays.

Convolutions are valid (no padding) cross-correlations. Every layer caches
what its backward pass needs; gradients accumulate into Parameter.grad and
are zeroed by the optimizer step. Max pools route gradient to the first
maximal element of each window.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


class Parameter:
    """A trainable array and its gradient."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)


class Layer:
    def params(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(1.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float64):
        self.w = Parameter(_uniform_init(rng, (n_in, n_out), n_in, dtype))
        self.b = Parameter(np.zeros(n_out, dtype=dtype))
        self._x: np.ndarray | None = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.w.value.shape[0]:
            raise ShapeError(f"dense expects (*, {self.w.value.shape[0]}), got {x.shape}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dout):
        self.w.grad += self._x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.w.value.T


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class Dropout(Layer):
    """Inverted dropout; identity in evaluation mode."""

    def __init__(self, p: float, rng: np.random.Generator):
        if not 0 <= p < 1:
            raise ShapeError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng
        self._mask: np.ndarray | None = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Conv1d(Layer):
    """Valid cross-correlation along the slice axis.

    Input (B, S, E); filters span the full width E and slide over S, giving
    (B, S - h + 1, F).
    """

    def __init__(self, height: int, width: int, n_filters: int,
                 rng: np.random.Generator, dtype=np.float64):
        self.height = height
        fan_in = height * width
        self.w = Parameter(_uniform_init(rng, (n_filters, height, width), fan_in, dtype))
        self.b = Parameter(np.zeros(n_filters, dtype=dtype))
        self._windows: np.ndarray | None = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.w.value.shape[2]:
            raise ShapeError(f"conv1d expects (*, S, {self.w.value.shape[2]}), got {x.shape}")
        if x.shape[1] < self.height:
            raise ShapeError(f"conv1d height {self.height} exceeds {x.shape[1]} slices")
        # windows: (B, P, E, h) with P = S - h + 1
        self._windows = sliding_window_view(x, self.height, axis=1)
        return np.einsum("bpeh,fhe->bpf", self._windows, self.w.value) + self.b.value

    def backward(self, dout):
        self.w.grad += np.einsum("bpeh,bpf->fhe", self._windows, dout)
        self.b.grad += dout.sum(axis=(0, 1))
        b, p, _ = dout.shape
        s = p + self.height - 1
        dx = np.zeros((b, s, self.w.value.shape[2]), dtype=dout.dtype)
        for o in range(self.height):
            dx[:, o : o + p, :] += np.einsum("bpf,fe->bpe", dout, self.w.value[:, o, :])
        return dx


class GlobalMaxPool1d(Layer):
    """Max over the position axis: (B, P, F) -> (B, F)."""

    def forward(self, x, train=False):
        if x.shape[1] < 1:
            raise ShapeError("cannot max-pool an empty feature map")
        self._shape = x.shape
        self._argmax = np.argmax(x, axis=1)  # first index on ties
        return np.take_along_axis(x, self._argmax[:, None, :], axis=1)[:, 0, :]

    def backward(self, dout):
        dx = np.zeros(self._shape, dtype=dout.dtype)
        np.put_along_axis(dx, self._argmax[:, None, :], dout[:, None, :], axis=1)
        return dx


class Conv2d(Layer):
    """Valid 2-D cross-correlation, channels-last: (B, H, W, Cin) -> (B, H', W', Cout)."""

    def __init__(self, kernel: int, c_in: int, c_out: int,
                 rng: np.random.Generator, dtype=np.float64):
        self.kernel = kernel
        fan_in = kernel * kernel * c_in
        self.w = Parameter(_uniform_init(rng, (kernel, kernel, c_in, c_out), fan_in, dtype))
        self.b = Parameter(np.zeros(c_out, dtype=dtype))
        self._windows: np.ndarray | None = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False):
        k = self.kernel
        if x.ndim != 4 or x.shape[3] != self.w.value.shape[2]:
            raise ShapeError(f"conv2d expects (*, H, W, {self.w.value.shape[2]}), got {x.shape}")
        if x.shape[1] < k or x.shape[2] < k:
            raise ShapeError(f"conv2d kernel {k}x{k} exceeds input {x.shape[1]}x{x.shape[2]}")
        # windows: (B, H', W', C, k, k)
        self._windows = sliding_window_view(x, (k, k), axis=(1, 2))
        return np.einsum("bhwcij,ijco->bhwo", self._windows, self.w.value) + self.b.value

    def backward(self, dout):
        k = self.kernel
        self.w.grad += np.einsum("bhwcij,bhwo->ijco", self._windows, dout)
        self.b.grad += dout.sum(axis=(0, 1, 2))
        b, hp, wp, _ = dout.shape
        h, w = hp + k - 1, wp + k - 1
        dx = np.zeros((b, h, w, self.w.value.shape[2]), dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dx[:, i : i + hp, j : j + wp, :] += np.einsum(
                    "bhwo,co->bhwc", dout, self.w.value[i, j]
                )
        return dx


class MaxPool2d(Layer):
    """Non-overlapping size x size max pool; trailing rows/columns that do not
    fill a window are dropped (floor semantics)."""

    def __init__(self, size: int = 2):
        self.size = size

    def forward(self, x, train=False):
        s = self.size
        if s == 1:
            self._identity = True
            return x
        self._identity = False
        b, h, w, c = x.shape
        hp, wp = h // s, w // s
        if hp < 1 or wp < 1:
            raise ShapeError(f"maxpool {s}x{s} cannot tile input {h}x{w}")
        self._in_shape = x.shape
        blocks = x[:, : hp * s, : wp * s, :].reshape(b, hp, s, wp, s, c)
        flat = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(b, hp, wp, c, s * s)
        self._argmax = np.argmax(flat, axis=-1)
        return np.take_along_axis(flat, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        if self._identity:
            return dout
        s = self.size
        b, h, w, c = self._in_shape
        hp, wp = h // s, w // s
        dflat = np.zeros((b, hp, wp, c, s * s), dtype=dout.dtype)
        np.put_along_axis(dflat, self._argmax[..., None], dout[..., None], axis=-1)
        dx = np.zeros(self._in_shape, dtype=dout.dtype)
        dx[:, : hp * s, : wp * s, :] = (
            dflat.reshape(b, hp, wp, c, s, s)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(b, hp * s, wp * s, c)
        )
        return dx


class Flatten(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)
