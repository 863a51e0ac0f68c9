"""Exception types shared across the package."""


class CpgError(Exception):
    """Base class for all package errors."""


class InvalidDegreeError(CpgError, ValueError):
    """Polynomial degree below the minimum the construction allows."""


class DomainError(CpgError, ValueError):
    """Evaluation point or interval outside the admissible domain."""


class MeshValidationError(CpgError, ValueError):
    """Time mesh violates ordering or degree constraints."""


class CapabilityError(CpgError):
    """A callable does not provide the derivative order a computation needs."""


class LookupFailure(CpgError, KeyError):
    """Unknown registry identifier."""


class StepFailure(CpgError):
    """A time step could not be completed.

    Carries the one-based interval index and the last coefficient change
    (``residual``) of the fixed-point iteration, if any.
    """

    def __init__(self, message: str, interval: int, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.interval = interval
        self.residual = residual
        self.iterations = iterations
