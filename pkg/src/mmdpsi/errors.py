"""Exception types shared across the package.

The CLI maps these onto distinct exit codes: configuration problems (2),
data/parsing problems (3), and numerical failures (4).
"""


class MmdPsiError(Exception):
    """Base class for all package errors."""


class ConfigError(MmdPsiError, ValueError):
    """Invalid configuration value (bad bandwidth, k out of range, ...)."""


class DataError(MmdPsiError, ValueError):
    """Invalid or inconsistent input data (parse failures, shape mismatch)."""


class NumericalError(MmdPsiError, RuntimeError):
    """Numerical failure (zero pivot scale, infeasible selection event)."""


class InfeasibleSelectionError(NumericalError):
    """The observed score vector violates the selection event it claims."""
