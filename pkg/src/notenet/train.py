"""Training loop, stopping rule and run reports.

Training minimizes binary cross-entropy with Adam. After every epoch the
mean training loss is checked against the stopping rule: stop once the
loss has failed to drop by more than ``stop_min_delta`` for
``stop_patience`` consecutive epochs. The reported model is the epoch with
the lowest training loss.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .corpus import EncodedBatch
from .errors import ConfigError, NumericalError, ShapeError
from .metrics import accuracy, roc
from .tensor import Tensor, backward, make_result
from .zoo import Model, ModelSpec, build

log = logging.getLogger(__name__)

BCE_EPS = 1e-7


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    max_epochs: int = 50
    stop_min_delta: float = 0.01
    stop_patience: int = 2
    seed_init: int = 1
    seed_stochastic: int = 2
    shuffle: bool = True
    dtype: str = "float32"

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.stop_min_delta < 0:
            raise ConfigError("stop_min_delta must be >= 0")
        if self.stop_patience < 1:
            raise ConfigError("stop_patience must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    seconds: float


@dataclass
class RunReport:
    model_id: str
    epochs: list[EpochRecord]
    stop_epoch: int
    selected_epoch: int
    patience_rule_epoch: int  # stop_epoch - patience, the paper-style reading
    stopped_early: bool
    selected_checkpoint: str | None
    test_auc: float
    test_accuracy: float
    test_roc: list[tuple[float, float]]
    seconds_to_stop: float
    total_seconds: float
    model_spec: dict
    config: dict
    parameter_count: int
    kernel_backend: str
    validation_auc: float | None = None
    validation_accuracy: float | None = None
    validation_roc: list[tuple[float, float]] | None = None
    extra: dict = field(default_factory=dict)

    TIMING_FIELDS = ("seconds_to_stop", "total_seconds")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def without_timing(self) -> dict:
        d = self.to_dict()
        for k in self.TIMING_FIELDS:
            d.pop(k)
        for rec in d["epochs"]:
            rec.pop("seconds")
        return d

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


# ------------------------------------------------------------------ loss


def bce_loss(p: Tensor, y) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps]."""
    y = np.asarray(y, dtype=p.dtype).reshape(-1)
    if p.shape != y.shape:
        raise ShapeError(f"bce_loss: {p.shape[0] if p.ndim else 1} predictions but {y.size} labels")
    pc = np.clip(p.data, BCE_EPS, 1.0 - BCE_EPS)
    n = y.size
    val = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p.data >= BCE_EPS) & (p.data <= 1.0 - BCE_EPS)

    def bw(g):
        return (g * inside * (pc - y) / (pc * (1.0 - pc)) / n,)

    return make_result(np.asarray(val, dtype=p.dtype), (p,), bw)


# ------------------------------------------------------------------ optimizer


class Adam:
    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [t for _, t in params] if params and isinstance(params[0], tuple) else list(params)
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data -= update.astype(p.dtype)


# ------------------------------------------------------------------ stopping


def should_stop(losses, min_delta: float = 0.01, patience: int = 2) -> bool:
    """True when each of the last ``patience`` epochs improved by at most ``min_delta``."""
    if len(losses) < patience + 1:
        return False
    window = losses[-(patience + 1):]
    return all(prev - cur <= min_delta for prev, cur in zip(window[:-1], window[1:]))


def select_epoch(losses) -> int:
    """1-based epoch of the lowest loss, earliest on ties."""
    if len(losses) == 0:
        raise ValueError("no epochs recorded")
    return int(np.argmin(np.asarray(losses))) + 1


# ------------------------------------------------------------------ loop


def iterate_batches(n: int, batch_size: int, rng: np.random.Generator | None):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_epoch(model: Model, data: EncodedBatch, optimizer: Adam, config: TrainConfig,
                epoch: int = 1) -> EpochRecord:
    t0 = time.perf_counter()
    total_loss = 0.0
    correct = 0
    rng = model.rng if config.shuffle else None
    for idx in iterate_batches(len(data), config.batch_size, rng):
        p = model.forward(data.sequences[idx], training=True)
        loss = bce_loss(p, data.labels[idx])
        lval = float(loss.data)
        if not math.isfinite(lval):
            raise NumericalError(f"non-finite loss {lval} in epoch {epoch} (model {model.spec.model_id})")
        optimizer.zero_grad()
        backward(loss)
        optimizer.step()
        total_loss += lval * len(idx)
        correct += int(np.sum((p.data >= 0.5) == (data.labels[idx] == 1)))
    n = len(data)
    return EpochRecord(epoch, total_loss / n, correct / n, time.perf_counter() - t0)


def evaluate_loss(model: Model, data: EncodedBatch) -> float:
    from .tensor import no_grad

    with no_grad():
        p = model.forward(data.sequences, training=False)
        return float(bce_loss(p, data.labels).data)


def fit(model: Model, train: EncodedBatch, config: TrainConfig, checkpoint_dir=None, on_epoch=None):
    """Train until the stopping rule fires or ``max_epochs`` is reached.

    Returns ``(records, stopped_early, best_snapshot, seconds_to_stop)``; the
    model is left holding the parameters of the selected (lowest-loss) epoch.
    """
    config.validate()
    opt = Adam(model.parameters(), config.learning_rate)
    records: list[EpochRecord] = []
    best, best_loss = model.snapshot(), math.inf
    stopped = False
    t0 = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        rec = train_epoch(model, train, opt, config, epoch)
        records.append(rec)
        if checkpoint_dir is not None:
            model.save(Path(checkpoint_dir) / checkpoint_name(epoch))
        if rec.loss < best_loss:
            best_loss, best = rec.loss, model.snapshot()
        log.info("model %s epoch %d loss %.4f acc %.3f (%.1fs)",
                 model.spec.model_id, epoch, rec.loss, rec.accuracy, rec.seconds)
        if on_epoch is not None:
            on_epoch(rec)
        if should_stop([r.loss for r in records], config.stop_min_delta, config.stop_patience):
            stopped = True
            break
    seconds = time.perf_counter() - t0
    model.restore(best)
    return records, stopped, best, seconds


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:03d}.ckpt"


def _score(model: Model, data: EncodedBatch):
    p = model.predict(data)
    curve = roc(p, data.labels)
    return curve, accuracy(p, data.labels)


def run(spec: ModelSpec, train: EncodedBatch, test: EncodedBatch, config: TrainConfig = TrainConfig(),
        validation: EncodedBatch | None = None, checkpoint_dir=None, on_epoch=None):
    """Train ``spec`` on ``train`` and score the selected epoch on ``test``.

    Returns ``(report, model)``. Every epoch is checkpointed when
    ``checkpoint_dir`` is given.
    """
    config.validate()
    t0 = time.perf_counter()
    model = build(spec, config.seed_init, config.seed_stochastic, np.dtype(config.dtype))
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    records, stopped, _, seconds = fit(model, train, config, checkpoint_dir, on_epoch)
    losses = [r.loss for r in records]
    selected = select_epoch(losses)
    test_curve, test_acc = _score(model, test)
    report = RunReport(
        model_id=spec.model_id,
        epochs=records,
        stop_epoch=len(records),
        selected_epoch=selected,
        patience_rule_epoch=max(1, len(records) - config.stop_patience) if stopped else len(records),
        stopped_early=stopped,
        selected_checkpoint=checkpoint_name(selected) if checkpoint_dir is not None else None,
        test_auc=test_curve.auc,
        test_accuracy=test_acc,
        test_roc=test_curve.points(),
        seconds_to_stop=seconds,
        total_seconds=0.0,
        model_spec=spec.to_dict(),
        config=asdict(config),
        parameter_count=model.param_count(),
        kernel_backend=_kernels.BACKEND,
    )
    if validation is not None:
        vcurve, vacc = _score(model, validation)
        report.validation_auc = vcurve.auc
        report.validation_accuracy = vacc
        report.validation_roc = vcurve.points()
    report.total_seconds = time.perf_counter() - t0
    return report, model
