"""Numerical failure types raised by the solver stack.

Input contract violations raise plain ``ValueError``; everything here means the
numbers went wrong, and the CLI maps it to exit code 2.
"""


class NumericalError(RuntimeError):
    """Base class for numerical failures."""


class CFLViolationError(NumericalError):
    """Time step too large for the sound speed it is used with."""


class NonFiniteFieldError(NumericalError):
    """NaN or Inf detected in a field."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DirichletSolveError(NumericalError):
    """Conjugate gradient did not reach the requested tolerance."""

    def __init__(self, message: str, info: int = 0):
        super().__init__(message)
        self.info = info


class DivergenceError(NumericalError):
    """Sustained residual growth in the reconstruction loop."""

    def __init__(self, message: str, iteration: int, residuals: list[float] | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.residuals = residuals or []


class ReconstructionError(NumericalError):
    """A solver failure inside the reconstruction loop, tagged with its iteration."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
