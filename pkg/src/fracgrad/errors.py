"""Exception hierarchy shared by all modules."""


class FracGradError(Exception):
    """Base class for every error raised by :mod:`fracgrad`."""


class ValidationError(FracGradError, ValueError):
    """Invalid input: parameters, shapes, supports or configuration."""


class NumericalError(FracGradError, ArithmeticError):
    """A computation produced non-finite values or violated an internal check."""
