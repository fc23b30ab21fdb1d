"""Reverse-mode automatic differentiation over numpy arrays.

Every operation returns a new :class:`Tensor`. When gradient tracking is on
and at least one input requires a gradient, the result remembers its inputs
and a closure mapping the upstream gradient to one gradient per input.
:func:`backward` walks that graph in reverse topological order.
"""
from __future__ import annotations

import contextlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording the graph."""
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- basic properties
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # -- operators
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap ``data`` and, if tracking applies, attach it to the graph.

    ``backward_fn(g)`` must return one gradient (or None) per parent.
    """
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every tracked ancestor."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg


# ------------------------------------------------------------- elementwise


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` along broadcast dimensions."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    # python scalars and raw arrays adopt the dtype of the tensor operand
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype if isinstance(b, Tensor) else None))
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"shapes {a.shape} and {b.shape} are not broadcastable") from None
    return a, b


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    )


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    )


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def elementwise(op: str, a, b) -> Tensor:
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


# ------------------------------------------------------------- activations


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function without overflow for large |x|."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = stable_sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return make_result(t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    # np.maximum keeps NaN, so divergence upstream is not silently zeroed
    return make_result(np.maximum(x.data, x.dtype.type(0)), (x,), lambda g: (g * mask,))


def identity(x: Tensor) -> Tensor:
    return x


ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu, "linear": identity}


def activation(op: str, x: Tensor) -> Tensor:
    try:
        return ACTIVATIONS[op](x)
    except KeyError:
        raise ValueError(f"unknown activation {op!r}") from None


# ------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` where ``b`` is 2-D and ``a`` has any leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")

    def bw(g):
        ga = g @ b.data.T
        gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return make_result(a.data @ b.data, (a, b), bw)


# ------------------------------------------------------------- shape & reductions


def reshape(x: Tensor, shape) -> Tensor:
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def tsum(x: Tensor, axis=None) -> Tensor:
    out = np.asarray(x.data.sum(axis=axis))

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=True),)

    return make_result(out, (x,), bw)


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis), 1.0 / n)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    return make_result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def flip(x: Tensor, axis: int) -> Tensor:
    return make_result(np.flip(x.data, axis).copy(), (x,), lambda g: (np.flip(g, axis).copy(),))


def take_rows(table: Tensor, indices: np.ndarray, scatter_add: Callable) -> Tensor:
    """Gather ``table[indices]``; backward scatter-adds with ``scatter_add``."""
    def bw(g):
        gt = np.zeros_like(table.data)
        scatter_add(gt, indices.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return make_result(table.data[indices], (table,), bw)


# ------------------------------------------------------------- gradient check


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    n_checked: int
    worst: tuple[str, tuple[int, ...]] | None
    pairs: np.ndarray = field(repr=False, default=None)  # (n_checked, 2): analytic, numeric
    floor: float = 1e-8

    def __bool__(self):
        return self.passed

    def max_error_at(self, floor: float) -> float:
        """Max relative error of the same entries under a different floor."""
        if self.n_checked == 0:
            return 0.0
        return float(relative_error(self.pairs[:, 0], self.pairs[:, 1], floor).max())


def relative_error(a, n, floor: float = 1e-8):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def grad_check(
    f: Callable[..., Tensor],
    inputs,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    *,
    max_entries: int | None = None,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare analytic gradients of scalar ``f(*inputs)`` with central differences.

    ``inputs`` is a Tensor or a sequence of Tensors; their ``data`` is
    perturbed in place and restored. ``max_entries`` samples that many
    coordinates per tensor instead of checking every one. Relative error is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    saved = [(t.requires_grad, t.grad) for t in inputs]
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    backward(f(*inputs))
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    for t, (rg, g) in zip(inputs, saved):
        t.requires_grad, t.grad = rg, g

    rng = np.random.default_rng(seed)
    pairs, where = [], []
    with no_grad():
        for k, t in enumerate(inputs):
            flat = t.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
            for i in idx:
                orig = flat[i]
                flat[i] = orig + step
                up = float(f(*inputs).data.sum())
                flat[i] = orig - step
                down = float(f(*inputs).data.sum())
                flat[i] = orig
                pairs.append((analytic[k].reshape(-1)[i], (up - down) / (2 * step)))
                where.append((t.name or f"input{k}", tuple(int(j) for j in np.unravel_index(i, t.shape))))
    pairs = np.array(pairs, dtype=np.float64).reshape(-1, 2)
    if not len(pairs):
        return GradCheckReport(True, 0.0, 0, None, pairs, floor)
    errs = relative_error(pairs[:, 0], pairs[:, 1], floor)
    j = int(np.argmax(errs))
    return GradCheckReport(bool(errs[j] < tolerance), float(errs[j]), len(pairs), where[j], pairs, floor)


# ------------------------------------------------------------- checkpoints

_MAGIC = b"NNCKPT01"


def save_checkpoint(named: Sequence[tuple[str, np.ndarray]], path) -> None:
    """Write an ordered list of named arrays as little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(named)))
        for name, arr in named:
            raw = name.encode("utf-8")
            arr = np.asarray(arr)
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> list[tuple[str, np.ndarray]]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    pos = 8
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    out = []
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
            pos += 8 * ndim
            n = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape).copy()
            pos += 8 * n
            out.append((name, arr))
    except (struct.error, ValueError):
        raise DataError(f"{path}: truncated checkpoint") from None
    if pos != len(buf):
        raise DataError(f"{path}: trailing bytes after {count} entries")
    return out


def assign_checkpoint(params: Sequence[tuple[str, Tensor]], entries) -> None:
    """Copy checkpoint ``entries`` into ``params``; names and shapes must match exactly."""
    names = [n for n, _ in params]
    got = [n for n, _ in entries]
    if names != got:
        raise DataError(f"checkpoint names {got} do not match model parameters {names}")
    for (name, t), (_, arr) in zip(params, entries):
        if tuple(arr.shape) != t.shape:
            raise DataError(f"{name}: checkpoint shape {arr.shape} != parameter shape {t.shape}")
    for (_, t), (_, arr) in zip(params, entries):
        t.data[...] = arr.astype(t.dtype)
