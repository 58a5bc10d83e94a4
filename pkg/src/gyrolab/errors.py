"""Shared exception types."""


class DomainError(ValueError):
    """An argument lies outside the contract of the operation."""


class NumericError(RuntimeError):
    """A numeric procedure failed to reach its accuracy target."""


class EnumerationLimitError(RuntimeError):
    """A combinatorial enumeration would exceed its hard size guard."""


class QuadratureError(NumericError):
    """Adaptive integration stopped before meeting tolerance.

    Carries the best value and the achieved error estimate so callers
    can decide whether the partial result is still usable.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
