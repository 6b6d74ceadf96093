"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (data errors 3, numeric failures 4),
so library code should raise the most specific class that applies.
"""


class PradaNetError(Exception):
    """Base class for all package errors."""


class DataValidationError(PradaNetError):
    """Malformed or unusable input data."""


class NumericError(PradaNetError):
    """Non-finite values or other numeric breakdown during computation."""


class ConfigError(PradaNetError):
    """Invalid configuration value."""
