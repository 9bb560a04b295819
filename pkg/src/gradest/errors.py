"""Exception hierarchy shared by all gradest modules."""


class GradestError(Exception):
    """Base class for all workbench errors."""


class DomainError(GradestError):
    """A coordinate point lies outside the chart domain."""


class ChartError(GradestError):
    """A requested ball or radius is not representable in the chart
    (typically radius >= injectivity radius at the center)."""


class ConditioningError(GradestError):
    """The metric is numerically singular or badly conditioned."""


class DegeneracyError(GradestError):
    """Tangent vectors supposed to span a plane are (nearly) dependent."""


class EscapeError(GradestError):
    """A geodesic left the chart domain before the requested time."""

    def __init__(self, message, exit_time=None):
        super().__init__(message)
        self.exit_time = exit_time


class UnsupportedError(GradestError):
    """The operation has no closed form / implementation for this kind."""


class ResolutionError(GradestError):
    """The grid is too coarse for the requested construction."""


class ParameterError(GradestError):
    """A scalar parameter violates its documented range."""


class RegionError(GradestError):
    """An empty or invalid subregion was requested."""


class SolverError(GradestError):
    """The linear solver failed to reach its residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EllipticityError(GradestError):
    """Coefficients fail the required operator ellipticity lower bound."""


class HypothesisError(GradestError):
    """Inputs violate the curvature/radius hypothesis of a construction."""


class ConjugatePointError(GradestError):
    """The differential of the exponential map degenerated."""


class DataError(GradestError):
    """A data series is too short or malformed for the requested fit."""


class ConfigError(GradestError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, message, code="invalid"):
        super().__init__(message)
        self.code = code
