from typing import List, Optional, Tuple


class BoseLabError(Exception):
    """Base class for every error raised by the lab.

    `exit_code` is what the command line returns when the error escapes a
    command.
    """

    exit_code = 3


class ValidationFailure(BoseLabError, ValueError):
    """Inputs were rejected before (or instead of) any computation."""

    exit_code = 2


class ConfigValidationError(ValidationFailure):
    """An experiment configuration failed validation.

    Args:
        message (str): Summary message.
        field_errors (List[Tuple[str, str]]): (dotted field path, reason) pairs,
            one per invalid field.
    """

    def __init__(self, message: str, field_errors: List[Tuple[str, str]] = None):
        self.field_errors = list(field_errors or [])
        details = "; ".join(f"{path}: {reason}" for path, reason in self.field_errors)
        super().__init__(f"{message} {details}".strip())


class InvalidPotentialError(ValidationFailure):
    """The potential profile is negative, non-finite or has a bad support."""


class GridMismatchError(ValidationFailure):
    """Two objects that must share a grid do not."""


class FitRefusedError(ValidationFailure):
    """A rate fit was requested on unusable data."""


class ContractViolationError(ValidationFailure):
    """A precondition of an operation does not hold."""


class NumericalFailure(BoseLabError, RuntimeError):
    """A computation started but could not produce a trustworthy result."""

    exit_code = 3


class ResolutionError(NumericalFailure):
    """The discretization cannot resolve the requested interaction scale."""

    def __init__(self, message: str, max_admissible_n: Optional[float] = None):
        self.max_admissible_n = max_admissible_n
        if max_admissible_n is not None:
            message = f"{message} Largest admissible N is {max_admissible_n:.6g}."
        super().__init__(message)


class SolverConvergenceError(NumericalFailure):
    """The eigenvalue search did not converge to the nodeless ground state."""


class SingularityError(NumericalFailure):
    """A singular function was evaluated at its singular point."""


class StepSizeError(NumericalFailure):
    """The time step is too large for the requested accuracy."""


class NumericError(NumericalFailure):
    """A linear-algebra or quadrature routine failed."""


class AssemblyError(NumericalFailure):
    """An assembled generator or phase violates its structural invariants."""


class TruncationError(NumericalFailure):
    """A series did not reach its tolerance within the allowed number of terms."""

    def __init__(self, message: str, residual_bound: float):
        self.residual_bound = residual_bound
        super().__init__(f"{message} Residual bound: {residual_bound:.3e}.")


class IntegrationDivergedError(NumericalFailure):
    """The frame integration lost the symplectic structure."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (t = {time:.6g})")
