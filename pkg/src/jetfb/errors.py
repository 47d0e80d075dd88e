"""Exception types shared across the solver stack."""


class JetfbError(Exception):
    """Base class for all library errors."""


class InvalidProfileError(JetfbError):
    """Upstream velocity profile violates its admissibility conditions."""


class DomainError(JetfbError, ValueError):
    """Argument outside the mathematical domain of an evaluator."""


class SonicStateError(DomainError):
    """Momentum at or beyond the sonic threshold on the exact branch."""


class SonicFreeBoundaryError(DomainError):
    """Free-boundary momentum is not subsonic for the given Bernoulli value."""


class CavitationError(JetfbError):
    """Downstream speed undefined: Bernoulli value drops below the enthalpy."""


class PropertyViolationError(JetfbError):
    """A structural property guaranteed by the model failed numerically."""


class TruncationTooDeepError(JetfbError):
    """The nozzle wall never reaches the requested inlet depth."""


class ResolutionError(JetfbError):
    """Grid spacing too coarse for the requested boundary-layer width."""


class InvalidLambdaError(JetfbError):
    """Free-boundary momentum incompatible with the outlet data."""


class NonFiniteFieldError(JetfbError):
    """NaN or Inf encountered in a field evaluation."""


class IterationLimitError(JetfbError):
    """Iterative solve exhausted its budget; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QualitativeFailureError(JetfbError):
    """A converged solution violates a qualitative invariant."""

    def __init__(self, message, prop=None, node=None):
        super().__init__(message)
        self.prop = prop
        self.node = node


class NoFreeBoundaryError(JetfbError):
    """Contour extraction found no free boundary (legitimate at small momentum)."""


class GraphViolationError(JetfbError):
    """Extracted free boundary is not a single-valued graph in y."""


class NoFitError(JetfbError):
    """Bisection bracket for the momentum fit could not be established."""


class ConfigError(JetfbError):
    """Run configuration file is malformed or inconsistent."""
