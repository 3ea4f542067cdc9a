"""Exception types shared across the package.

The CLI maps these onto stable exit codes (parameter/config -> 2,
data/format -> 3, numeric -> 4), so library code should raise the most
specific class that applies.
"""


class HsiClustError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(HsiClustError, ValueError):
    """An argument or configuration value is invalid."""


class DataError(HsiClustError):
    """A file, format, or shape problem in input data."""


class NumericError(HsiClustError):
    """A numerical failure (non-finite update, solver breakdown)."""


class DeficientSupportError(NumericError):
    """The selected atom set is rank deficient in a least-squares solve."""
