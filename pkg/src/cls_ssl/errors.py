"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid hyper-parameter, architecture or experiment setting."""


class ShapeError(ValueError):
    """Array dimensions or indices do not line up."""


class DataError(ValueError):
    """Malformed or out-of-range input data."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where a finite one is required."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
