"""Exception hierarchy.

``InputError`` subclasses signal bad user input (CLI exit code 2),
``NumericalError`` subclasses signal a failed computation (exit code 3).
``NeedMoreCandidates`` is resumable (exit code 4).
"""

from __future__ import annotations

from typing import Any


class PertcritError(Exception):
    """Base class for all package errors."""


class InputError(PertcritError, ValueError):
    pass


class NumericalError(PertcritError, ArithmeticError):
    pass


class NotHermitian(InputError):
    pass


class TooLarge(InputError):
    pass


class InsufficientData(InputError):
    pass


class InsufficientOrbitals(InputError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class SpectraOverlap(NumericalError):
    """A Sylvester divisor fell below the rejection threshold."""

    def __init__(self, message: str, min_divisor: float, tol: float):
        super().__init__(message)
        self.min_divisor = min_divisor
        self.tol = tol


class Stagnation(NumericalError):
    def __init__(self, message: str, state: Any = None):
        super().__init__(message)
        self.state = state


class DivergedFromGuess(NumericalError):
    def __init__(self, message: str, guess: complex, result: complex):
        super().__init__(message)
        self.guess = guess
        self.result = result


class AmbiguousMatch(NumericalError):
    def __init__(self, message: str, theta: float):
        super().__init__(message)
        self.theta = theta


class SpectrumFailure(NumericalError):
    pass


class Exhausted(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class ScfNotConverged(NumericalError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NeedMoreCandidates(PertcritError):
    """Raised when the candidate budget ran out without finding the dominant point.

    ``state`` holds the Arnoldi state so the search can be resumed.
    """

    def __init__(self, message: str, state: Any = None, examined: list | None = None):
        super().__init__(message)
        self.state = state
        self.examined = examined or []
