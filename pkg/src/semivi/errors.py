"""Exception types shared across the package."""


class SemiviError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SemiviError, ValueError):
    """Array dimensions do not match an operation's contract."""


class NonFiniteError(SemiviError, FloatingPointError):
    """A NaN or Inf appeared where only finite values are allowed."""


class DataError(SemiviError, ValueError):
    """A dataset file or record is malformed."""


class ConfigError(SemiviError, ValueError):
    """A run configuration is invalid or inconsistent."""


class QuadratureError(SemiviError, RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""
