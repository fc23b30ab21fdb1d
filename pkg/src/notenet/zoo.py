"""The twelve architectures (a-l) as declarative layer plans.

A :class:`ModelSpec` resolves every hyperparameter and expands into an
ordered list of layer descriptors; :func:`build` turns that plan into a
:class:`Model` with parameters drawn from a seeded init stream.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import layers as Lyr
from .corpus import EncodedBatch
from .errors import ConfigError, ShapeError
from .tensor import Tensor, assign_checkpoint, load_checkpoint, no_grad, save_checkpoint, sigmoid, stable_sigmoid

MODEL_IDS = tuple("abcdefghijkl")

MODEL_NAMES = {
    "a": "LSTM",
    "b": "LSTM with dropout",
    "c": "Stacked LSTM 2-layer",
    "d": "Stacked LSTM 3-layer",
    "e": "Bidirectional LSTM",
    "f": "CNN with dropout",
    "g": "Separable CNN with dropout",
    "h": "Deep CNN",
    "i": "Deep CNN simplified",
    "j": "CNN-LSTM",
    "k": "CNN-BLSTM",
    "l": "BLSTM-CNN",
    "baseline": "Bag-of-words linear (hinge)",
}


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    vocab_size: int
    max_len: int
    embedding_dim: int
    hidden_size: int = 32
    conv_filters: int = 64
    conv_kernel_width: int = 5
    dropout_rate: float = 0.2
    dense_units: int = 64
    pool_width: int = 2
    pool_stride: int = 2

    @classmethod
    def create(cls, model_id: str, vocab_size: int, max_len: int, **overrides) -> "ModelSpec":
        """Spec with defaults; embedding size follows the fourth-root rule unless given."""
        if overrides.get("embedding_dim") is None:
            overrides["embedding_dim"] = Lyr.embedding_dim(vocab_size)
        spec = cls(model_id, vocab_size, max_len, **overrides)
        spec.layer_plan  # validates
        return spec

    def to_dict(self) -> dict:
        d = asdict(self)
        d["name"] = MODEL_NAMES.get(self.model_id, "")
        d["parameter_count"] = self.parameter_count
        d["layer_plan"] = self.layer_plan
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def layer_plan(self) -> list[dict]:
        return layer_plan(self)

    @property
    def parameter_count(self) -> int:
        return sum(layer_param_count(d) for d in self.layer_plan)


def layer_param_count(d: dict) -> int:
    kind = d["kind"]
    if kind == "embedding":
        return d["rows"] * d["dim"]
    if kind == "lstm":
        return 4 * (d["c_in"] * d["hidden"] + d["hidden"] ** 2 + d["hidden"])
    if kind == "bilstm":
        return 8 * (d["c_in"] * d["hidden"] + d["hidden"] ** 2 + d["hidden"])
    if kind == "conv1d":
        return d["width"] * d["c_in"] * d["c_out"] + d["c_out"]
    if kind == "separable_conv1d":
        return d["width"] * d["c_in"] + d["c_in"] * d["c_out"] + d["c_out"]
    if kind == "dense":
        return d["c_in"] * d["units"] + d["units"]
    return 0


class _Planner:
    """Tracks (length, channels) while layers are appended."""

    def __init__(self, spec: ModelSpec):
        self.s = spec
        self.plan: list[dict] = []
        self.length = spec.max_len
        self.channels = spec.embedding_dim
        self.plan.append({"kind": "embedding", "rows": spec.vocab_size + 2, "dim": spec.embedding_dim})

    def _need(self, width, what):
        if self.length < width:
            raise ConfigError(
                f"model {self.s.model_id}: {what} needs length >= {width}, "
                f"but only {self.length} remain (max_len {self.s.max_len})"
            )

    def conv(self, separable=False):
        k, f = self.s.conv_kernel_width, self.s.conv_filters
        self._need(k, "convolution")
        kind = "separable_conv1d" if separable else "conv1d"
        self.plan.append({"kind": kind, "width": k, "c_in": self.channels, "c_out": f, "activation": "relu"})
        self.length -= k - 1
        self.channels = f

    def pool(self):
        p, st = self.s.pool_width, self.s.pool_stride
        self._need(p, "max pooling")
        self.plan.append({"kind": "maxpool1d", "pool": p, "stride": st})
        self.length = (self.length - p) // st + 1

    def global_pool(self):
        self.plan.append({"kind": "global_maxpool1d"})
        self.length = None

    def dropout(self):
        self.plan.append({"kind": "dropout", "rate": self.s.dropout_rate})

    def lstm(self, return_sequences=False, dropout=False, bidirectional=False):
        h = self.s.hidden_size
        rate = self.s.dropout_rate if dropout else 0.0
        self.plan.append({
            "kind": "bilstm" if bidirectional else "lstm",
            "c_in": self.channels,
            "hidden": h,
            "return_sequences": return_sequences,
            "input_dropout": rate,
            "recurrent_dropout": rate,
        })
        self.channels = 2 * h if bidirectional else h
        if not return_sequences:
            self.length = None

    def flatten(self):
        self.plan.append({"kind": "flatten"})
        self.channels = self.length * self.channels
        self.length = None

    def dense(self, units, act):
        self.plan.append({"kind": "dense", "c_in": self.channels, "units": units, "activation": act})
        self.channels = units

    def head(self):
        self.dense(1, "sigmoid")
        return self.plan


def layer_plan(spec: ModelSpec) -> list[dict]:
    if spec.model_id not in MODEL_IDS:
        raise ConfigError(f"unknown model_id {spec.model_id!r}; expected one of {', '.join(MODEL_IDS)}")
    if min(spec.vocab_size, spec.max_len, spec.embedding_dim, spec.hidden_size,
           spec.conv_filters, spec.conv_kernel_width, spec.dense_units,
           spec.pool_width, spec.pool_stride) < 1:
        raise ConfigError("all sizes in a model spec must be positive")
    if not 0.0 <= spec.dropout_rate < 1.0:
        raise ConfigError("dropout_rate must lie in [0, 1)")
    p = _Planner(spec)
    m = spec.model_id
    if m == "a":
        p.lstm()
    elif m == "b":
        p.lstm(dropout=True)
    elif m in "cd":
        n_layers = 2 if m == "c" else 3
        for i in range(n_layers):
            p.lstm(return_sequences=i < n_layers - 1, dropout=True)
    elif m == "e":
        p.lstm(dropout=True, bidirectional=True)
    elif m in "fg":
        p.conv(separable=m == "g")
        p.global_pool()
        p.dropout()
    elif m in "hi":
        per_set = 2 if m == "h" else 1
        for _ in range(2):
            for _ in range(per_set):
                p.conv()
            p.pool()
        p.dropout()
        p.flatten()
        p.dense(spec.dense_units, "relu")
        p.dropout()
    elif m in "jk":
        p.conv()
        p.pool()
        p.lstm(bidirectional=m == "k")
    elif m == "l":
        p.lstm(return_sequences=True, bidirectional=True)
        p.conv()
        p.global_pool()
    return p.head()


def _make_layer(d: dict, rng, dtype, is_head: bool) -> Lyr.Layer:
    kind = d["kind"]
    if kind == "embedding":
        return Lyr.Embedding(d["rows"], d["dim"], rng, dtype)
    if kind == "conv1d":
        return Lyr.Conv1D(d["width"], d["c_in"], d["c_out"], rng, d["activation"], dtype)
    if kind == "separable_conv1d":
        return Lyr.SeparableConv1D(d["width"], d["c_in"], d["c_out"], rng, d["activation"], dtype)
    if kind == "maxpool1d":
        return Lyr.MaxPool1D(d["pool"], d["stride"])
    if kind == "global_maxpool1d":
        return Lyr.GlobalMaxPool1D()
    if kind == "dropout":
        return Lyr.Dropout(d["rate"])
    if kind == "flatten":
        return Lyr.Flatten()
    if kind == "dense":
        # the head's sigmoid is applied by Model so logits stay available
        return Lyr.Dense(d["c_in"], d["units"], rng, "linear" if is_head else d["activation"], dtype)
    if kind in ("lstm", "bilstm"):
        def one():
            return Lyr.LSTM(d["c_in"], d["hidden"], rng, d["return_sequences"],
                            d["input_dropout"], d["recurrent_dropout"], dtype)
        if kind == "lstm":
            return one()
        return Lyr.Bidirectional(one(), one())
    raise ConfigError(f"unknown layer kind {kind!r}")


class Model:
    def __init__(self, spec: ModelSpec, seed_init: int = 1, seed_stochastic: int = 2, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.seed_init = seed_init
        self.seed_stochastic = seed_stochastic
        init_rng = np.random.default_rng(seed_init)
        self.rng = np.random.default_rng(seed_stochastic)
        plan = spec.layer_plan
        self.layers = [
            _make_layer(d, init_rng, self.dtype, i == len(plan) - 1) for i, d in enumerate(plan)
        ]

    def parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, t in layer.params():
                out.append((f"{i:02d}.{layer.kind}.{name}", t))
        return out

    def param_count(self) -> int:
        return sum(t.size for _, t in self.parameters())

    def _sequences(self, batch) -> np.ndarray:
        seqs = batch.sequences if isinstance(batch, EncodedBatch) else np.asarray(batch)
        if seqs.ndim != 2 or seqs.shape[1] != self.spec.max_len:
            raise ShapeError(
                f"model {self.spec.model_id} expects sequences of length {self.spec.max_len}, "
                f"got shape {seqs.shape}"
            )
        return seqs

    def logits(self, batch, training: bool = False) -> Tensor:
        x = self._sequences(batch)
        for layer in self.layers:
            x = layer(x, training, self.rng)
        return x.reshape(x.shape[0])

    def forward(self, batch, training: bool = False) -> Tensor:
        """Probabilities of the positive class, shape (n,)."""
        return sigmoid(self.logits(batch, training))

    __call__ = forward

    def predict(self, batch, batch_size: int = 256) -> np.ndarray:
        """Evaluation-mode probabilities in float64."""
        seqs = self._sequences(batch)
        out = []
        with no_grad():
            for start in range(0, len(seqs), batch_size):
                z = self.logits(seqs[start:start + batch_size]).data
                out.append(stable_sigmoid(z.astype(np.float64)))
        return np.concatenate(out) if out else np.zeros(0)

    def snapshot(self) -> list[np.ndarray]:
        return [t.data.copy() for _, t in self.parameters()]

    def restore(self, arrays) -> None:
        for (_, t), arr in zip(self.parameters(), arrays):
            t.data[...] = arr

    def save(self, path) -> None:
        save_checkpoint([(n, t.data) for n, t in self.parameters()], path)

    def load(self, path) -> None:
        assign_checkpoint(self.parameters(), load_checkpoint(path))


def build(spec: ModelSpec, seed_init: int = 1, seed_stochastic: int = 2, dtype=np.float32) -> Model:
    if spec.model_id == "baseline":
        raise ConfigError("the baseline is built with build_baseline(), not build()")
    layer_plan(spec)
    return Model(spec, seed_init, seed_stochastic, dtype)


def build_baseline(train_docs, vocab=None, **kwargs):
    """Fit the bag-of-words hinge-loss classifier on ``train_docs``."""
    from .baseline import BagOfWordsClassifier

    return BagOfWordsClassifier(vocab=vocab, **kwargs).fit(train_docs)
