"""Exception types shared across the package."""


class HrmError(Exception):
    """Base class for package errors."""


class ConfigurationError(HrmError, ValueError):
    """Inconsistent or invalid configuration (layout, geometry, power model, config file)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(HrmError, ArithmeticError):
    """A numerical routine failed (e.g. a correlation matrix that is not PSD)."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class LowGainWarning(UserWarning):
    """Amplification gain from the power budget fell below unity."""
