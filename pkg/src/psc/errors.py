"""Exception types shared across the package."""


class PSCError(Exception):
    """Base class for all package errors."""


class DomainViolation(PSCError):
    """A grid value left the domain of a pointwise map (1 + v below the floor)."""


class ResolutionError(PSCError):
    """Grid or field resolution is insufficient for the requested degree."""


class NoConvergence(PSCError):
    pass


class SingularJacobian(PSCError):
    """Newton Jacobian is (numerically) singular, typically near a bifurcation point."""


class AmbiguousSpectrum(PSCError):
    pass


class OnResonance(PSCError):
    pass


class DataError(PSCError):
    pass


class PositivityViolation(PSCError):
    pass


class StepFailure(PSCError):
    pass


class InsufficientData(PSCError):
    pass


class Unclassified(PSCError):
    pass
