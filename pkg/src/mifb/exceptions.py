"""Exception types raised by the solver and its helpers."""


class MifbError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MifbError, ValueError):
    """An argument is malformed: wrong dimension, unknown name, out of range."""


class InvalidParameterError(InvalidArgumentError):
    """Solver parameters violate the stepsize or inertia bounds.

    ``index`` holds the iteration at which the violation was found, when
    the violation is schedule dependent.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalFailureError(MifbError, ArithmeticError):
    """A non-finite value appeared, or an iterative routine did not converge."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InsufficientDataError(MifbError, ValueError):
    """Too few samples to estimate a limit or fit a rate."""
