"""Hot inner loops with two interchangeable implementations.

The numba path is used when numba imports cleanly, unless the environment
variable ``NOTENET_DISABLE_NUMBA`` is set to a truthy value, in which case
the pure-numpy path is used. Both expose the same functions.
"""
import importlib
import os

_NAMES = (
    "lstm_forward",
    "lstm_backward",
    "maxpool_forward",
    "maxpool_backward",
    "scatter_add_rows",
    "depthwise_forward",
    "depthwise_backward",
)


def _numba_disabled() -> bool:
    return os.environ.get("NOTENET_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


def load_backend(name: str):
    """Import a backend module by name ('numba' or 'numpy')."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(f"{__name__}._{name}_impl")


def available_backends() -> list[str]:
    out = ["numpy"]
    try:
        load_backend("numba")
    except ImportError:
        pass
    else:
        out.insert(0, "numba")
    return out


if _numba_disabled():
    BACKEND = "numpy"
else:
    try:
        _impl = load_backend("numba")
        BACKEND = "numba"
    except ImportError:  # numba missing or broken
        BACKEND = "numpy"
if BACKEND == "numpy":
    _impl = load_backend("numpy")

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
scatter_add_rows = _impl.scatter_add_rows
depthwise_forward = _impl.depthwise_forward
depthwise_backward = _impl.depthwise_backward

__all__ = ["BACKEND", "load_backend", "available_backends", *_NAMES]
