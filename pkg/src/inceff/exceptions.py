"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class InceffError(Exception):
    """Base class for all package errors."""


class ConfigError(InceffError, ValueError):
    """Invalid parameter, option, or configuration value."""


class DataError(InceffError, ValueError):
    """Input data violates a contract (shapes, ranges, missing columns)."""


class NumericalError(InceffError, RuntimeError):
    """A numerical procedure failed (singular system, tolerance not met)."""
