"""Exception types raised across the package."""


class ScanBError(Exception):
    """Base class for all package errors."""


class InputError(ScanBError, ValueError):
    """Malformed arguments: wrong shapes, dimensions or out-of-range values."""


class DegenerateDataError(ScanBError, ValueError):
    """Data that makes a statistic undefined (zero spread, singular covariance)."""


class ConfigurationError(ScanBError, ValueError):
    """An infeasible detector or experiment configuration."""


class NumericalError(ScanBError, ArithmeticError):
    """A numerical routine failed to produce a usable value."""


class CalibrationError(ScanBError, RuntimeError):
    """Threshold calibration by simulation did not converge."""


class CsvFormatError(InputError):
    """A malformed stream file; ``row`` is the 1-based line number."""

    def __init__(self, message, row=None, width_mismatch=False):
        super().__init__(message)
        self.row = row
        self.width_mismatch = width_mismatch
