"""Layers, activations and losses for the CNN stack.

Tensors are plain NumPy arrays: float64 in reference mode (used by all
numeric tests), float32 in fast mode. Batched layouts are NHWC for the
convolutional stack and (N, features) after flattening. Every layer
implements forward/backward; parameter gradients accumulate into
``Param.grad`` during backward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSignalError, ShapeError
from . import backend

DTYPES = {"reference": np.float64, "fast": np.float32}


def dtype_for(mode: str):
    try:
        return DTYPES[mode]
    except KeyError:
        raise ValueError(f"numeric mode must be 'reference' or 'fast', got {mode!r}")


class Param:
    """A trainable array with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self):
        self.grad[...] = 0


@dataclass
class Context:
    """Per-forward-pass state: mode, RNG for stochastic layers, SNR labels."""

    train: bool = False
    rng: np.random.Generator | None = None
    snr_db: np.ndarray | None = None


EVAL_CTX = Context(train=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Subgradient 0 at exactly 0.
    return dy * (x > 0)


def softmax(y: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis; rejects non-finite input."""
    y = np.asarray(y)
    if not np.isfinite(y).all():
        raise ValueError("softmax input contains non-finite values")
    z = y - y.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


PROB_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, labels) -> np.ndarray | float:
    """-log p[label] with a 1e-12 probability floor.

    Scalar for a single distribution, per-sample array for a batch.
    """
    probs = np.asarray(probs)
    if probs.ndim == 1:
        label = int(labels)
        if not 0 <= label < probs.size:
            raise ValueError(f"label {label} out of range for {probs.size} classes")
        return float(-np.log(max(probs[label], PROB_FLOOR)))
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError("label out of range")
    picked = probs[np.arange(probs.shape[0]), labels]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss, probabilities and d(loss)/d(logits) = (p - onehot)/N."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    probs = softmax(logits)
    losses = cross_entropy(probs, labels)
    n = logits.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return float(np.mean(losses)), probs, dlogits


def dropout(x: np.ndarray, rate: float, train: bool,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout; identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    mask = rng.random(x.shape) >= rate
    return x * mask.astype(x.dtype) / (1.0 - rate)


def gaussian_noise(x: np.ndarray, snr_db: np.ndarray, train: bool,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Add white noise at each record's labeled SNR; identity in eval mode.

    x is (N, ...) with one SNR label per leading-axis record; power is
    measured per record on the tensor as stored (I/Q split into reals).
    """
    if not train:
        return x
    flat = x.reshape(x.shape[0], -1)
    power = np.mean(flat * flat, axis=1)
    if np.any(power < 1e-30):
        raise DegenerateSignalError("noise layer fed a zero-power record")
    snr_db = np.asarray(snr_db, dtype=np.float64)
    if snr_db.size != x.shape[0]:
        raise ShapeError(
            f"{x.shape[0]} records but {snr_db.size} SNR labels")
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0)).astype(x.dtype)
    noise = rng.standard_normal(flat.shape, dtype=x.dtype)
    noise *= sigma[:, None]
    return x + noise.reshape(x.shape)


class Conv2D:
    """Same-padded 2-D cross-correlation with optional fused ReLU."""

    def __init__(self, cin: int, cout: int, kh: int = 2, kw: int = 3,
                 activation: bool = True, rng=None, dtype=np.float64,
                 name: str = "conv"):
        self.cin, self.cout, self.kh, self.kw = cin, cout, kh, kw
        self.activation = activation
        self.name = name
        rng = rng or np.random.default_rng(0)
        fan_in = kh * kw * cin
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(kh, kw, cin, cout))
        self.w = Param(f"{name}.weight", w.astype(dtype))
        self.b = Param(f"{name}.bias", np.zeros(cout, dtype=dtype))
        self._x_pad = None
        self._pre = None

    def params(self):
        return [self.w, self.b]

    def _pad(self, x):
        n, h, w, _ = x.shape
        pt = (self.kh - 1) // 2
        pl = (self.kw - 1) // 2
        x_pad = np.zeros((n, h + self.kh - 1, w + self.kw - 1, self.cin),
                         dtype=x.dtype)
        x_pad[:, pt:pt + h, pl:pl + w, :] = x
        return x_pad

    def forward(self, x, ctx=EVAL_CTX):
        if x.ndim != 4 or x.shape[3] != self.cin:
            raise ShapeError(
                f"{self.name}: input shape {x.shape} does not match kernel "
                f"{(self.kh, self.kw, self.cin, self.cout)}")
        if x.shape[1] < 1 or x.shape[2] < 1:
            raise ShapeError(f"{self.name}: empty spatial dims {x.shape}")
        x_pad = self._pad(x)
        out = backend.conv2d_forward(x_pad, self.w.value, self.b.value)
        if ctx.train:
            self._x_pad = x_pad
        if self.activation:
            if ctx.train:
                self._pre = out
            return relu(out)
        return out

    def backward(self, dy):
        if self.activation:
            dy = relu_backward(dy, self._pre)
        dw, db = backend.conv2d_backward_params(self._x_pad, dy)
        self.w.grad += dw
        self.b.grad += db
        dx_pad = backend.conv2d_backward_input(dy, self.w.value,
                                               self._x_pad.shape)
        pt = (self.kh - 1) // 2
        pl = (self.kw - 1) // 2
        n, h, w = dy.shape[0], dy.shape[1], dy.shape[2]
        return dx_pad[:, pt:pt + h, pl:pl + w, :]


class MaxPool1x2:
    """Halve the width; gradient routes to each window's first argmax."""

    def __init__(self, name: str = "pool"):
        self.name = name
        self._idx = None
        self._in_shape = None

    def params(self):
        return []

    def forward(self, x, ctx=EVAL_CTX):
        n, h, w, c = x.shape
        if w % 2:
            raise ShapeError(f"{self.name}: width {w} is odd, cannot pool by 2")
        pairs = x.reshape(n, h, w // 2, 2, c)
        idx = pairs.argmax(axis=3)
        out = np.take_along_axis(pairs, idx[:, :, :, None, :], axis=3)
        out = out[:, :, :, 0, :]
        if ctx.train:
            self._idx = idx
            self._in_shape = x.shape
        return out

    def backward(self, dy):
        n, h, w, c = self._in_shape
        dx = np.zeros((n, h, w // 2, 2, c), dtype=dy.dtype)
        np.put_along_axis(dx, self._idx[:, :, :, None, :],
                          dy[:, :, :, None, :], axis=3)
        return dx.reshape(n, h, w, c)


class Dropout:
    def __init__(self, rate: float, name: str = "dropout"):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.name = name
        self._mask = None

    def params(self):
        return []

    def forward(self, x, ctx=EVAL_CTX):
        if not ctx.train or self.rate == 0.0:
            self._mask = None
            return x
        keep = ctx.rng.random(x.shape) >= self.rate
        self._mask = keep.astype(x.dtype) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class Flatten:
    def __init__(self, name: str = "flatten"):
        self.name = name
        self._shape = None

    def params(self):
        return []

    def forward(self, x, ctx=EVAL_CTX):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Dense:
    """Affine map with optional fused ReLU."""

    def __init__(self, fin: int, fout: int, activation: bool = False,
                 rng=None, dtype=np.float64, name: str = "dense"):
        self.fin, self.fout = fin, fout
        self.activation = activation
        self.name = name
        rng = rng or np.random.default_rng(0)
        limit = np.sqrt(6.0 / fin)
        w = rng.uniform(-limit, limit, size=(fin, fout))
        self.w = Param(f"{name}.weight", w.astype(dtype))
        self.b = Param(f"{name}.bias", np.zeros(fout, dtype=dtype))
        self._x = None
        self._pre = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, ctx=EVAL_CTX):
        if x.ndim != 2 or x.shape[1] != self.fin:
            raise ShapeError(
                f"{self.name}: input shape {x.shape} does not match weight "
                f"{(self.fin, self.fout)}")
        out = x @ self.w.value + self.b.value
        if ctx.train:
            self._x = x
            if self.activation:
                self._pre = out
        return relu(out) if self.activation else out

    def backward(self, dy):
        if self.activation:
            dy = relu_backward(dy, self._pre)
        self.w.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T


class GaussianNoiseLayer:
    """Trains against fresh per-epoch noise at each record's labeled SNR."""

    def __init__(self, name: str = "noise"):
        self.name = name

    def params(self):
        return []

    def forward(self, x, ctx=EVAL_CTX):
        if not ctx.train:
            return x
        if ctx.snr_db is None:
            raise ValueError("noise layer needs per-record SNR labels in train mode")
        return gaussian_noise(x, ctx.snr_db, True, ctx.rng)

    def backward(self, dy):
        return dy
