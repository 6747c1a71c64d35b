"""
Custom exception classes for switchrad.

This module defines specific exception types for the failure scenarios of
the radius computations, including malformed input files, violated system
invariants, exhausted budgets and numeric failures. Every exception carries
the process exit code the command-line front end reports for it.
"""

from typing import Any, Optional


class SwitchRadError(Exception):
    """Base class for all switchrad errors.

    Subclasses set ``exit_code`` to the value the CLI exits with when the
    error escapes a command.
    """

    exit_code = 1

    def __init__(self, message: str, detail: Optional[Any] = None):
        """Initialize base error.

        Args:
            message: Human-readable error message
            detail: Free-form diagnostic payload (optional)
        """
        self.detail = detail
        super().__init__(message)


class ParseError(SwitchRadError):
    """Exception raised when an input document cannot be parsed.

    This exception is used for malformed JSON matrix files and for
    unreadable parameter spellings on the command line.
    """

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        """Initialize parse error.

        Args:
            message: Human-readable error message
            line: 1-based line of the offending token (optional)
            column: 1-based column of the offending token (optional)
        """
        self.line = line
        self.column = column
        super().__init__(message)


class ValidationError(SwitchRadError):
    """Exception raised when well-formed input violates an invariant.

    This exception is used for dimension mismatches, non-finite entries and
    the System 1 invariants of singular/rotation pairs.
    """

    exit_code = 2

    def __init__(self, message: str, invariant: Optional[str] = None):
        """Initialize validation error.

        Args:
            message: Human-readable error message
            invariant: Short name of the failed invariant (optional)
        """
        self.invariant = invariant
        super().__init__(message)


class UnsupportedSizeError(ValidationError):
    """Exception raised when a matrix dimension exceeds the supported range."""

    def __init__(self, message: str, size: Optional[int] = None, limit: Optional[int] = None):
        """Initialize unsupported size error.

        Args:
            message: Human-readable error message
            size: Offending dimension (optional)
            limit: Largest supported dimension (optional)
        """
        self.size = size
        self.limit = limit
        super().__init__(message, invariant="dimension")


class NotComplexSpectrumError(ValidationError):
    """Exception raised when a rotation matrix has real or repeated eigenvalues."""

    def __init__(self, message: str, discriminant: Optional[float] = None):
        """Initialize not-complex-spectrum error.

        Args:
            message: Human-readable error message
            discriminant: Value of (b11-b22)^2 + 4*b12*b21 (optional)
        """
        self.discriminant = discriminant
        super().__init__(message, invariant="complex-spectrum")


class NotSingularError(ValidationError):
    """Exception raised when the singular member of a system is invertible."""

    def __init__(self, message: str, determinant: Optional[float] = None):
        """Initialize not-singular error.

        Args:
            message: Human-readable error message
            determinant: Determinant that failed the singularity test (optional)
        """
        self.determinant = determinant
        super().__init__(message, invariant="singular")


class ThetaRangeError(ValidationError):
    """Exception raised when an Ostrowski target lies outside [-alpha, 1-alpha)."""

    def __init__(
        self,
        message: str,
        theta: Optional[float] = None,
        lower: Optional[float] = None,
        upper: Optional[float] = None,
    ):
        """Initialize theta range error.

        Args:
            message: Human-readable error message
            theta: Rejected target (optional)
            lower: Inclusive lower bound (optional)
            upper: Exclusive upper bound (optional)
        """
        self.theta = theta
        self.lower = lower
        self.upper = upper
        super().__init__(message, invariant="theta-range")


class InvalidConfigError(SwitchRadError):
    """Exception raised when a configuration value or budget is unusable."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        """Initialize invalid config error.

        Args:
            message: Human-readable error message
            field: Name of the offending configuration field (optional)
        """
        self.field = field
        super().__init__(message)


class BudgetExceededError(SwitchRadError):
    """Exception raised when a computation would exceed its work budget.

    This exception is used when an exhaustive enumeration would visit more
    products than the configured guard allows.
    """

    exit_code = 3

    def __init__(self, message: str, requested: Optional[int] = None, limit: Optional[int] = None):
        """Initialize budget exceeded error.

        Args:
            message: Human-readable error message
            requested: Amount of work the call needed (optional)
            limit: Configured limit (optional)
        """
        self.requested = requested
        self.limit = limit
        super().__init__(message)


class InsufficientExpansionError(BudgetExceededError):
    """Exception raised when a continued fraction is too short for a request."""


class NumericFailureError(SwitchRadError):
    """Exception raised when two numeric paths disagree or a result is not finite."""

    exit_code = 4

    def __init__(self, message: str, operation: Optional[str] = None):
        """Initialize numeric failure error.

        Args:
            message: Human-readable error message
            operation: Operation that failed (optional)
        """
        self.operation = operation
        super().__init__(message)


class NilpotentSystemError(SwitchRadError):
    """Signal raised when the singular member of a system is nilpotent.

    The system then collapses to the origin after two steps, so callers
    report a stabilizability radius of 0 instead of failing.
    """

    exit_code = 0

    def __init__(self, message: str, lambda2: float = 0.0):
        """Initialize nilpotent system signal.

        Args:
            message: Human-readable error message
            lambda2: Nonzero-eigenvalue estimate that fell under tolerance
        """
        self.lambda2 = lambda2
        super().__init__(message)
