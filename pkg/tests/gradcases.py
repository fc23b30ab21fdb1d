"""Randomized gradient-check cases for every layer op and every model.

Each builder takes a numpy Generator and returns ``(f, inputs)`` where
``f(*inputs)`` is a scalar Tensor. Shapes stay at 8 or below and
everything runs in float64. Stochastic ops re-seed their mask stream
inside ``f`` so every finite-difference evaluation sees the same masks.
"""
import numpy as np

from notenet import layers as Lyr
from notenet.errors import ConfigError
from notenet.tensor import Tensor, mul, tsum
from notenet.train import bce_loss
from notenet.zoo import MODEL_IDS, ModelSpec, build


def _param(rng, *shape, scale=1.0):
    return Tensor(scale * rng.normal(size=shape), requires_grad=True)


def _dims(rng):
    return int(rng.integers(1, 4)), int(rng.integers(1, 5))


def _projection(rng):
    """Fixed random readout so the loss depends on every output entry."""
    cache = {}

    def project(out):
        if out.shape not in cache:
            cache[out.shape] = rng.normal(size=out.shape)
        return tsum(mul(out, cache[out.shape]))
    return project


def case_embedding(rng):
    rows, d = int(rng.integers(2, 9)), int(rng.integers(1, 5))
    idx = rng.integers(0, rows, size=(int(rng.integers(1, 4)), int(rng.integers(1, 8))))
    proj = _projection(rng)
    return (lambda t: proj(Lyr.embed(idx, t))), [_param(rng, rows, d)]


def case_dense(rng):
    n, c = _dims(rng)
    u = int(rng.integers(1, 5))
    act = str(rng.choice(["linear", "relu", "sigmoid", "tanh"]))
    proj = _projection(rng)
    return (lambda x, W, b: proj(Lyr.dense(x, W, b, act))), [
        _param(rng, n, c), _param(rng, c, u), _param(rng, u)]


def case_conv1d(rng):
    n, c = _dims(rng)
    k = int(rng.integers(1, 4))
    L = int(rng.integers(k, 9))
    f = int(rng.integers(1, 5))
    act = str(rng.choice(["linear", "relu"]))
    proj = _projection(rng)
    return (lambda x, K, b: proj(Lyr.conv1d(x, K, b, act))), [
        _param(rng, n, L, c), _param(rng, k, c, f), _param(rng, f)]


def case_separable_conv1d(rng):
    n, c = _dims(rng)
    k = int(rng.integers(1, 4))
    L = int(rng.integers(k, 9))
    f = int(rng.integers(1, 5))
    act = str(rng.choice(["linear", "relu"]))
    proj = _projection(rng)
    return (lambda x, D, P, b: proj(Lyr.separable_conv1d(x, D, P, b, act))), [
        _param(rng, n, L, c), _param(rng, k, c), _param(rng, c, f), _param(rng, f)]


def case_maxpool1d(rng):
    n, c = _dims(rng)
    pool = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 4))
    L = int(rng.integers(pool, 9))
    proj = _projection(rng)
    return (lambda x: proj(Lyr.maxpool1d(x, pool, stride))), [_param(rng, n, L, c)]


def case_global_maxpool(rng):
    n, c = _dims(rng)
    proj = _projection(rng)
    return (lambda x: proj(Lyr.global_maxpool(x))), [_param(rng, n, int(rng.integers(1, 9)), c)]


def case_dropout(rng):
    n, c = _dims(rng)
    rate = float(rng.uniform(0.1, 0.6))
    mode = str(rng.choice(["element", "sequence"]))
    seed = int(rng.integers(1 << 30))
    proj = _projection(rng)

    def f(x):
        return proj(Lyr.dropout(x, rate, True, np.random.default_rng(seed), mode))
    return f, [_param(rng, n, int(rng.integers(1, 8)), c)]


def case_flatten(rng):
    n, c = _dims(rng)
    proj = _projection(rng)
    return (lambda x: proj(Lyr.Flatten()(x))), [_param(rng, n, int(rng.integers(1, 5)), c)]


def _lstm_params(rng, c, h):
    return [_param(rng, c, 4 * h, scale=0.5), _param(rng, h, 4 * h, scale=0.5), _param(rng, 4 * h, scale=0.5)]


def case_lstm(rng):
    n, c = _dims(rng)
    h, L = int(rng.integers(1, 5)), int(rng.integers(1, 8))
    seqs = bool(rng.integers(2))
    drop = float(rng.choice([0.0, 0.3]))
    seed = int(rng.integers(1 << 30))
    proj = _projection(rng)

    def f(x, W, U, b):
        out = Lyr.lstm_forward(x, W, U, b, seqs, training=drop > 0, rng=np.random.default_rng(seed),
                               input_dropout=drop, recurrent_dropout=drop)
        return proj(out)
    return f, [_param(rng, n, L, c), *_lstm_params(rng, c, h)]


def case_bidirectional(rng):
    n, c = _dims(rng)
    h, L = int(rng.integers(1, 4)), int(rng.integers(1, 7))
    seqs = bool(rng.integers(2))
    proj = _projection(rng)

    def f(x, W1, U1, b1, W2, U2, b2):
        out = Lyr.bidirectional(
            x,
            lambda s: Lyr.lstm_forward(s, W1, U1, b1, seqs),
            lambda s: Lyr.lstm_forward(s, W2, U2, b2, seqs),
            seqs,
        )
        return proj(out)
    return f, [_param(rng, n, L, c), *_lstm_params(rng, c, h), *_lstm_params(rng, c, h)]


def case_bce(rng):
    n = int(rng.integers(1, 8))
    y = rng.integers(0, 2, size=n)
    p = Tensor(rng.uniform(0.05, 0.95, size=n), requires_grad=True)
    return (lambda t: bce_loss(t, y)), [p]


LAYER_CASES = {
    "embedding": case_embedding,
    "dense": case_dense,
    "conv1d": case_conv1d,
    "separable_conv1d": case_separable_conv1d,
    "maxpool1d": case_maxpool1d,
    "global_maxpool1d": case_global_maxpool,
    "dropout": case_dropout,
    "flatten": case_flatten,
    "lstm": case_lstm,
    "bidirectional": case_bidirectional,
    "bce_loss": case_bce,
}


def tiny_spec(model_id, rng):
    """Random small spec for ``model_id``; shrinks the kernel until the plan fits."""
    vocab = int(rng.integers(2, 7))
    fields = dict(
        embedding_dim=int(rng.integers(1, 5)),
        hidden_size=int(rng.integers(1, 5)),
        conv_filters=int(rng.integers(1, 5)),
        conv_kernel_width=int(rng.integers(1, 4)),
        dense_units=int(rng.integers(1, 5)),
        dropout_rate=float(rng.choice([0.0, 0.2, 0.5])),
    )
    max_len = int(rng.integers(4, 9)) if model_id not in "hi" else 8
    for width in range(fields["conv_kernel_width"], 0, -1):
        try:
            return ModelSpec.create(model_id, vocab, max_len, **dict(fields, conv_kernel_width=width))
        except ConfigError:
            continue
    raise AssertionError(f"no tiny plan fits model {model_id}")


# Central differences at step 1e-5 carry roundoff near eps * |loss| / step,
# about 1e-11 in float64, so relative error is only meaningful for gradients
# well above 1e-7. Composed models (deep recurrences) produce entries below
# that; their checks use this floor instead of 1e-8.
MODEL_FLOOR = 1e-6
JITTER = 0.3


def model_case(model_id, rng):
    """Full-model BCE loss at a generic point.

    Parameters are jittered away from their initial values because zero
    biases put ReLU pre-activations exactly on the kink whenever an upstream
    channel is dead, and no finite difference agrees with a one-sided
    derivative there.
    """
    spec = tiny_spec(model_id, rng)
    seed = int(rng.integers(1 << 30))
    model = build(spec, seed_init=int(rng.integers(1 << 30)), seed_stochastic=seed, dtype=np.float64)
    for _, t in model.parameters():
        t.data += JITTER * rng.normal(size=t.shape)
    n = int(rng.integers(1, 5))
    x = rng.integers(0, spec.vocab_size + 2, size=(n, spec.max_len))
    y = rng.integers(0, 2, size=n)

    def f(*_):
        model.rng = np.random.default_rng(seed)
        return bce_loss(model.forward(x, training=True), y)
    return f, [t for _, t in model.parameters()]


__all__ = ["LAYER_CASES", "MODEL_FLOOR", "MODEL_IDS", "model_case", "tiny_spec"]
