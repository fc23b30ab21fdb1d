"""Neural building blocks: embedding, dense, convolutions, pooling, dropout, LSTM.

Each op is a free function over :class:`~notenet.tensor.Tensor` so it can be
grad-checked on its own; the layer classes only own parameters and call the
ops. All layers take ``(x, training, rng)`` where ``rng`` is the stochastic
stream used for dropout masks.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _kernels as K
from .errors import DataError, ShapeError
from .tensor import (
    Tensor,
    activation,
    add,
    concat,
    flip,
    make_result,
    matmul,
    mul,
    reshape,
    take_rows,
)


def embedding_dim(vocab_size: int) -> int:
    """Fourth root of the vocabulary size, rounded half up, at least 1."""
    if vocab_size < 1:
        raise ValueError("vocab_size must be positive")
    return max(1, math.floor(vocab_size ** 0.25 + 0.5))


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ------------------------------------------------------------------ ops


def embed(indices, table: Tensor) -> Tensor:
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise DataError(
            f"embedding index out of range [0, {table.shape[0]}): "
            f"min {indices.min()}, max {indices.max()}"
        )
    return take_rows(table, indices, K.scatter_add_rows)


def dense(x: Tensor, W: Tensor, b: Tensor, act: str = "linear") -> Tensor:
    if x.ndim != 2 or x.shape[1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError(f"dense: input {x.shape}, kernel {W.shape}, bias {b.shape}")
    return activation(act, add(matmul(x, W), b))


def _conv_linear(x: Tensor, kernels: Tensor) -> Tensor:
    n, L, c_in = x.shape
    k, kc, c_out = kernels.shape
    if kc != c_in:
        raise ShapeError(f"conv1d: input has {c_in} channels, kernel expects {kc}")
    if L < k:
        raise ShapeError(f"conv1d: sequence length {L} shorter than kernel width {k}")
    lout = L - k + 1
    patches = sliding_window_view(x.data, k, axis=1).reshape(n * lout, c_in * k)
    k2d = kernels.data.transpose(1, 0, 2).reshape(c_in * k, c_out)

    def bw(g):
        g2d = g.reshape(n * lout, c_out)
        dk = (patches.T @ g2d).reshape(c_in, k, c_out).transpose(1, 0, 2)
        dp = (g2d @ k2d.T).reshape(n, lout, c_in, k)
        dx = np.zeros_like(x.data)
        for tau in range(k):
            dx[:, tau:tau + lout, :] += dp[..., tau]
        return dx, np.ascontiguousarray(dk)

    return make_result((patches @ k2d).reshape(n, lout, c_out), (x, kernels), bw)


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor, act: str = "relu") -> Tensor:
    """Valid 1-D convolution. ``kernels`` is (width, c_in, c_out)."""
    return activation(act, add(_conv_linear(x, kernels), bias))


def depthwise_conv1d(x: Tensor, depthwise: Tensor) -> Tensor:
    n, L, c = x.shape
    k, dc = depthwise.shape
    if dc != c:
        raise ShapeError(f"depthwise conv: input has {c} channels, kernel expects {dc}")
    if L < k:
        raise ShapeError(f"depthwise conv: sequence length {L} shorter than kernel width {k}")
    return make_result(
        K.depthwise_forward(x.data, depthwise.data),
        (x, depthwise),
        lambda g: K.depthwise_backward(g, x.data, depthwise.data),
    )


def separable_conv1d(
    x: Tensor, depthwise: Tensor, pointwise: Tensor, bias: Tensor, act: str = "relu"
) -> Tensor:
    """Per-channel convolution followed by a 1x1 channel mix."""
    return activation(act, add(matmul(depthwise_conv1d(x, depthwise), pointwise), bias))


def maxpool1d(x: Tensor, pool: int, stride: int | None = None) -> Tensor:
    stride = pool if stride is None else stride
    n, L, c = x.shape
    if L < pool:
        raise ShapeError(f"maxpool: sequence length {L} shorter than pool width {pool}")
    out, arg = K.maxpool_forward(x.data, pool, stride)
    return make_result(out, (x,), lambda g: (K.maxpool_backward(np.ascontiguousarray(g), arg, L),))


def global_maxpool(x: Tensor) -> Tensor:
    n, L, c = x.shape
    return reshape(maxpool1d(x, L, 1), (n, c))


def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Inverted-dropout mask: zeros and 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return (keep / (1.0 - rate)).astype(dtype)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None,
            mode: str = "element") -> Tensor:
    """``mode='element'`` draws a fresh mask per entry; ``'sequence'`` shares
    one mask across the time axis of each (n, L, c) sequence."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if mode == "element":
        shape = x.shape
    elif mode == "sequence":
        shape = (x.shape[0], 1, x.shape[2])
    else:
        raise ValueError(f"unknown dropout mode {mode!r}")
    return mul(x, dropout_mask(shape, rate, rng, x.dtype))


def _recurrence(xw: Tensor, U: Tensor, rec_mask, return_sequences: bool) -> Tensor:
    hs, cs, gates = K.lstm_forward(xw.data, U.data, rec_mask)

    def bw(g):
        if return_sequences:
            dhs = g
        else:
            dhs = np.zeros_like(hs)
            dhs[:, -1] = g
        return K.lstm_backward(dhs, hs, cs, gates, U.data, rec_mask)

    out = hs if return_sequences else np.ascontiguousarray(hs[:, -1])
    return make_result(out, (xw, U), bw)


def lstm_forward(
    x: Tensor,
    W: Tensor,
    U: Tensor,
    b: Tensor,
    return_sequences: bool = False,
    training: bool = False,
    rng: np.random.Generator | None = None,
    input_dropout: float = 0.0,
    recurrent_dropout: float = 0.0,
) -> Tensor:
    """Standard LSTM over (n, L, c_in), gates packed i, f, g, o along the last axis.

    Dropout masks are drawn once per sequence and reused at every step.
    """
    n, L, c_in = x.shape
    h = U.shape[0]
    if W.shape != (c_in, 4 * h) or U.shape != (h, 4 * h) or b.shape != (4 * h,):
        raise ShapeError(f"lstm: input {x.shape}, W {W.shape}, U {U.shape}, b {b.shape}")
    rec_mask = None
    if training and input_dropout > 0:
        x = dropout(x, input_dropout, True, rng, mode="sequence")
    if training and recurrent_dropout > 0:
        rec_mask = dropout_mask((n, h), recurrent_dropout, rng, x.dtype)
    xw = add(matmul(x, W), b)
    return _recurrence(xw, U, rec_mask, return_sequences)


def bidirectional(x: Tensor, forward_fn, backward_fn, return_sequences: bool = False) -> Tensor:
    """Concatenate a forward pass with a pass over the time-reversed input.

    ``forward_fn`` and ``backward_fn`` map a sequence tensor to LSTM output.
    """
    fwd = forward_fn(x)
    bwd = backward_fn(flip(x, 1))
    if fwd.shape[-1] != bwd.shape[-1]:
        raise ShapeError(f"bidirectional: hidden sizes {fwd.shape[-1]} and {bwd.shape[-1]} differ")
    if return_sequences:
        bwd = flip(bwd, 1)
    return concat([fwd, bwd], axis=-1)


# ------------------------------------------------------------------ layers


class Layer:
    kind = "layer"

    def params(self) -> list[tuple[str, Tensor]]:
        return []

    def param_count(self) -> int:
        return sum(t.size for _, t in self.params())

    def __call__(self, x, training=False, rng=None):
        raise NotImplementedError


class Embedding(Layer):
    kind = "embedding"

    def __init__(self, n_rows, dim, rng, dtype=np.float32):
        self.table = Tensor(glorot_uniform(rng, (n_rows, dim), n_rows, dim, dtype), True, "table")

    def params(self):
        return [("table", self.table)]

    def __call__(self, x, training=False, rng=None):
        return embed(x, self.table)


class Dense(Layer):
    kind = "dense"

    def __init__(self, c_in, units, rng, act="linear", dtype=np.float32):
        self.W = Tensor(glorot_uniform(rng, (c_in, units), c_in, units, dtype), True, "W")
        self.b = Tensor(np.zeros(units, dtype=dtype), True, "b")
        self.act = act

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def __call__(self, x, training=False, rng=None):
        return dense(x, self.W, self.b, self.act)


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, width, c_in, c_out, rng, act="relu", dtype=np.float32):
        shape = (width, c_in, c_out)
        self.kernels = Tensor(glorot_uniform(rng, shape, width * c_in, width * c_out, dtype), True, "kernels")
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), True, "bias")
        self.act = act

    def params(self):
        return [("kernels", self.kernels), ("bias", self.bias)]

    def __call__(self, x, training=False, rng=None):
        return conv1d(x, self.kernels, self.bias, self.act)


class SeparableConv1D(Layer):
    kind = "separable_conv1d"

    def __init__(self, width, c_in, c_out, rng, act="relu", dtype=np.float32):
        self.depthwise = Tensor(glorot_uniform(rng, (width, c_in), width, width, dtype), True, "depthwise")
        self.pointwise = Tensor(glorot_uniform(rng, (c_in, c_out), c_in, c_out, dtype), True, "pointwise")
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), True, "bias")
        self.act = act

    def params(self):
        return [("depthwise", self.depthwise), ("pointwise", self.pointwise), ("bias", self.bias)]

    def __call__(self, x, training=False, rng=None):
        return separable_conv1d(x, self.depthwise, self.pointwise, self.bias, self.act)


class MaxPool1D(Layer):
    kind = "maxpool1d"

    def __init__(self, pool, stride=None):
        self.pool = pool
        self.stride = pool if stride is None else stride

    def __call__(self, x, training=False, rng=None):
        return maxpool1d(x, self.pool, self.stride)


class GlobalMaxPool1D(Layer):
    kind = "global_maxpool1d"

    def __call__(self, x, training=False, rng=None):
        return global_maxpool(x)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, rate):
        self.rate = rate

    def __call__(self, x, training=False, rng=None):
        return dropout(x, self.rate, training, rng)


class Flatten(Layer):
    kind = "flatten"

    def __call__(self, x, training=False, rng=None):
        return reshape(x, (x.shape[0], -1))


class LSTM(Layer):
    kind = "lstm"

    def __init__(self, c_in, hidden, rng, return_sequences=False, input_dropout=0.0,
                 recurrent_dropout=0.0, dtype=np.float32):
        h4 = 4 * hidden
        self.W = Tensor(glorot_uniform(rng, (c_in, h4), c_in, h4, dtype), True, "W")
        self.U = Tensor(glorot_uniform(rng, (hidden, h4), hidden, h4, dtype), True, "U")
        b = np.zeros(h4, dtype=dtype)
        b[hidden:2 * hidden] = 1.0  # forget gate
        self.b = Tensor(b, True, "b")
        self.hidden = hidden
        self.return_sequences = return_sequences
        self.input_dropout = input_dropout
        self.recurrent_dropout = recurrent_dropout

    def params(self):
        return [("W", self.W), ("U", self.U), ("b", self.b)]

    def __call__(self, x, training=False, rng=None):
        return lstm_forward(
            x, self.W, self.U, self.b, self.return_sequences, training, rng,
            self.input_dropout, self.recurrent_dropout,
        )


class Bidirectional(Layer):
    kind = "bilstm"

    def __init__(self, forward_layer: LSTM, backward_layer: LSTM):
        if forward_layer.hidden != backward_layer.hidden:
            raise ShapeError("bidirectional layers must share the hidden size")
        if forward_layer.return_sequences != backward_layer.return_sequences:
            raise ValueError("bidirectional layers must agree on return_sequences")
        self.forward_layer = forward_layer
        self.backward_layer = backward_layer

    def params(self):
        return [(f"fwd.{n}", t) for n, t in self.forward_layer.params()] + [
            (f"bwd.{n}", t) for n, t in self.backward_layer.params()
        ]

    def __call__(self, x, training=False, rng=None):
        return bidirectional(
            x,
            lambda s: self.forward_layer(s, training, rng),
            lambda s: self.backward_layer(s, training, rng),
            self.forward_layer.return_sequences,
        )
