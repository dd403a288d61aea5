"""
Errors - Toolkit Module
Exception hierarchy shared by the algebra, solver and simulation layers.
"""

from __future__ import annotations

from typing import Any, Optional

USAGE_EXIT_CODE = 1
NUMERICAL_EXIT_CODE = 2


class ToolkitError(Exception):
    """Base exception carrying the CLI exit code and structured detail."""

    exit_code: int = NUMERICAL_EXIT_CODE

    def __init__(self, message: str, detail: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.detail = detail or {}

    def as_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "errorType": type(self).__name__,
            "message": str(self),
            "exitCode": self.exit_code,
        }
        if self.detail:
            payload["detail"] = self.detail
        return payload


class UsageError(ToolkitError):
    """Raised for malformed input that a user can fix."""

    exit_code = USAGE_EXIT_CODE


class PolynomialSyntaxError(UsageError):
    """Raised when polynomial text does not match the grammar."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}", {"offset": offset})
        self.offset = offset


class AlphabetError(UsageError):
    """Raised for variable indices or alphabet sizes that do not fit."""


class NotSelfAdjointError(UsageError):
    """Raised when an operation needs a self-adjoint polynomial."""


class EvaluationError(UsageError):
    """Raised when matrix assignments are missing or mis-sized."""


class MomentGuardError(UsageError):
    """Raised when a moment expansion would exceed its size guard."""


class NumericalError(ToolkitError):
    """Base class for numerical failures (exit code 2)."""


class RankAmbiguityError(NumericalError):
    """Raised when a singular value sits too close to the rank threshold."""


class ConvergenceError(NumericalError):
    """Raised when the Dyson solver cannot reach its tolerance."""


class PositivityError(NumericalError):
    """Raised when a solution leaves the closed upper half-plane."""


class SingularStabilityError(NumericalError):
    """Raised when the stability operator is numerically singular."""


class OracleError(NumericalError):
    """Raised when a closed-form oracle has no admissible root."""


class RootSelectionError(OracleError):
    """Raised when two admissible roots cannot be told apart."""


class TailNotDecayingError(NumericalError):
    """Raised when a truncated moment series has not converged."""


class ResolventError(NumericalError):
    """Raised when a generalized resolvent system is singular."""


class DensityMassError(NumericalError):
    """Raised when an integrated density does not carry unit mass."""


class ExperimentError(NumericalError):
    """Raised when an experiment cannot produce its fits."""


class ExperimentExecutionFailedError(ExperimentError):
    """Raised when every replica of an experiment failed."""


NUMERICAL_FAILURE_TYPES = (
    ConvergenceError,
    PositivityError,
    ResolventError,
    SingularStabilityError,
)
