"""Exception types shared across the package."""


class CovestError(Exception):
    """Base class for all covest errors."""


class NotPositiveDefinite(CovestError):
    """A matrix required to be symmetric positive definite is not."""


class SingularNormalEquations(CovestError):
    """The normal-equation matrix H^T R^-1 H could not be factorized."""


class ZeroMeanRequired(CovestError):
    """The difference-regret estimator needs a zero prior mean."""


class Diverged(CovestError):
    """Gradient descent increased the cost for too many consecutive steps."""


class InvalidDimension(CovestError):
    """Matrix or grid dimensions are inconsistent with the problem."""


class UnknownScenario(CovestError):
    """Requested benchmark scenario name is not registered."""


class SchemaMismatch(CovestError):
    """Persisted experiment files carry an unexpected schema version."""


class EmptySample(CovestError):
    """A statistic was requested from an empty sample set."""
