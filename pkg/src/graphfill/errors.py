"""Exception hierarchy used across the package."""


class GraphfillError(Exception):
    """Base class for all package errors."""


class InputError(GraphfillError, ValueError):
    """Malformed or out-of-contract input data."""


class ConfigError(GraphfillError, ValueError):
    """Invalid configuration value."""


class NumericError(GraphfillError, ArithmeticError):
    """Numerical failure: non-finite values, singular systems."""


class FormatError(GraphfillError, ValueError):
    """On-disk file does not match its declared format."""
