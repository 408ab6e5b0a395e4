"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class MvScaleError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MvScaleError):
    """Invalid configuration or argument combination."""


class DataError(MvScaleError):
    """Malformed or inconsistent input data (files, grids, id sets)."""


class NumericError(MvScaleError):
    """Numerical failure: degenerate support, non-finite gradient, etc."""
