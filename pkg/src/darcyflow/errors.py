"""Exception types shared across the package."""


class DarcyflowError(Exception):
    """Base class for all package-specific errors."""


class DomainError(DarcyflowError, ValueError):
    """Invalid argument: wrong dimension, out-of-range value, bad shape."""


class NumericError(DarcyflowError, ArithmeticError):
    """A computation produced non-finite values."""


class SolverError(DarcyflowError, RuntimeError):
    """A linear solve or root solve failed to meet its contract."""


class ConfigError(DarcyflowError, ValueError):
    """Experiment configuration is malformed or inconsistent."""
