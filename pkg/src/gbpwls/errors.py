"""Exception types shared across the package."""


class GbpwlsError(Exception):
    """Base class for all package errors."""


class GraphValidationError(GbpwlsError):
    """A measurement graph failed validation.

    Carries the list of Violation records produced by graph.validate().
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid measurement graph: {lines}")


class SingularInformationError(GbpwlsError):
    """An information matrix required to be invertible is numerically singular."""

    def __init__(self, what, subject):
        self.what = what
        self.subject = subject
        super().__init__(f"{what} singular at {subject}")


class DominanceViolationError(GbpwlsError):
    """The edge-information dominance condition (eta < 1) does not hold."""

    def __init__(self, eta):
        self.eta = eta
        super().__init__(
            f"edge-information dominance violated: eta = {eta:.6g} >= 1"
        )


class FixedPointError(GbpwlsError):
    """Message fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"fixed point not reached after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class UnobservableSystemError(GbpwlsError):
    """The global information matrix is not positive definite."""


class ArtifactMismatchError(GbpwlsError):
    """Input artifacts (graph / scenario / trace) do not belong together."""


class FileFormatError(GbpwlsError):
    """A graph or scenario file does not follow the documented schema."""
