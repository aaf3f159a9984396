"""Exception hierarchy shared by every swest module."""


class SwestError(Exception):
    """Base class for all errors raised by swest."""


class NonFiniteInput(SwestError, ValueError):
    pass


class EmptyInput(SwestError, ValueError):
    pass


class DimensionMismatch(SwestError, ValueError):
    pass


class ShapeMismatch(SwestError, ValueError):
    pass


class SizeMismatch(SwestError, ValueError):
    pass


class SizeCapExceeded(SwestError, ValueError):
    pass


class OutOfRange(SwestError, ValueError):
    pass


class InvalidScale(SwestError, ValueError):
    pass


class NotPositiveDefinite(SwestError, ValueError):
    pass


class UnsupportedOrder(SwestError, ValueError):
    pass


class DegenerateSample(SwestError, ValueError):
    pass


class InsufficientPoints(SwestError, ValueError):
    pass


class NonPositive(SwestError, ValueError):
    pass


class NoConvergence(SwestError, RuntimeError):
    """Raised when an iterative solver stops before meeting its tolerance."""

    def __init__(self, message, violation=None, n_iter=None):
        super().__init__(message)
        self.violation = violation
        self.n_iter = n_iter


class NonFiniteObjective(SwestError, RuntimeError):
    """Raised by an optimizer when the objective or gradient stops being finite.

    The partial :class:`~swest.optim.EstimateResult` is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MaxIterExceeded(UserWarning):
    """Warning emitted when an optimizer exhausts its iteration budget."""


class DataParseError(SwestError, ValueError):
    """Raised when a data file cannot be parsed; ``row`` is 1-based."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
