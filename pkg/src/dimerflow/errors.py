"""Exception hierarchy.

Each family maps onto a CLI exit code: validation problems exit with 1,
numerical inconsistencies with 2.
"""

from __future__ import annotations


class DimerflowError(Exception):
    exit_code = 2


class GraphError(DimerflowError, ValueError):
    """Malformed or invalid graph input."""

    exit_code = 1

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class NumericalError(DimerflowError, ArithmeticError):
    exit_code = 2


class ResonanceError(NumericalError):
    """Evaluation point sits on a local (subsystem) resonance."""


class SingularSystemError(NumericalError):
    """Matching matrix is singular at the requested point, i.e. a pole."""

    def __init__(self, message: str, condition: float = float("inf")):
        self.condition = condition
        super().__init__(message)


class ContourError(NumericalError):
    """No admissible contour exists around a pole."""


class ConsistencyError(NumericalError):
    """Two routes that must agree do not."""


class DegenerateSpectrumError(NumericalError):
    """A closed form was requested on a degenerate spectrum."""
