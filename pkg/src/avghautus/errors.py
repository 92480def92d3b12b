"""Exception types shared across the toolkit."""


class AvgHautusError(Exception):
    """Base class for all toolkit errors."""


class StepTooLarge(AvgHautusError):
    """Magnus commutator correction exceeded its safety bound."""


class SingularPropagator(AvgHautusError):
    """A step propagator is numerically singular."""


class IndexOrder(AvgHautusError):
    """Node indices passed in the wrong order (need i <= j)."""


class MissingObservation(AvgHautusError):
    """Operation requires an observation family C."""


class MissingControl(AvgHautusError):
    """Operation requires a control family B."""


class SingularFinalState(AvgHautusError):
    """U(tau,0)*U(tau,0) is numerically singular."""


class NonPositiveKappa(AvgHautusError):
    """Observability constant must be strictly positive."""


class MuTooLarge(AvgHautusError):
    """Perturbation smallness quantity mu >= 1; transfer undefined."""


class BoundaryViolation(AvgHautusError):
    """Test function does not vanish at the interval endpoints."""


class NegativeWeight(AvgHautusError):
    """Weight function must be nonnegative (and v strictly positive)."""


class QuadratureFailure(AvgHautusError):
    """Non-finite values encountered while assembling a quadrature."""


class ParseError(AvgHautusError):
    """Malformed configuration file (carries a line number)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(AvgHautusError):
    """Well-formed configuration that violates a type invariant."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalWarning(UserWarning):
    """Warning channel for clamped eigenvalues and weak-transfer diagnostics."""
