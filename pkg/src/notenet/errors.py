"""Exception types shared across the package.

The CLI maps each family onto its own exit code, so library code raises
the narrowest class that fits.
"""


class NotenetError(Exception):
    """Base class for all package errors."""


class DataError(NotenetError, ValueError):
    """Bad input data: malformed files, invalid labels, empty corpora."""


class ShapeError(NotenetError, ValueError):
    """Tensor shapes that do not fit an operation."""


class NumericalError(NotenetError, ArithmeticError):
    """Non-finite values during training or evaluation."""


class ConfigError(NotenetError, ValueError):
    """Invalid or inconsistent configuration."""
