"""Exception hierarchy for the illiqrisk package."""


class IlliqriskError(Exception):
    """Base class for all package errors."""


class ParseError(IlliqriskError):
    """A scenario file row or document could not be parsed."""


class ProbabilityError(IlliqriskError):
    """Probability weights are negative or do not sum to one."""


class SpaceMismatch(IlliqriskError):
    """Two scenario-indexed objects do not live on the same scenario space."""


class InvalidParams(IlliqriskError):
    """Numeric parameters outside their documented range."""


class InvalidModel(IlliqriskError):
    """A price-impact model is structurally invalid."""


class QuadratureNonConvergence(IlliqriskError):
    """Step-halving quadrature hit its refinement cap above tolerance."""


class TrancheCapViolation(IlliqriskError):
    """A child order exceeds the depth cap of its tranche."""


class MissingProbability(IlliqriskError):
    """The risk functional needs a probability vector and none was given."""


class NonFiniteInput(IlliqriskError):
    """An input array contains NaN or infinities."""


class UnsupportedModelForShortSide(IlliqriskError):
    """The short-side measure is only defined for model families with a
    proven decreasing/super-additive/concave profile."""


class NonPSDCovariance(IlliqriskError):
    """The correlation/covariance matrix is not positive semidefinite."""


class OutOfGridSpan(IlliqriskError):
    """An evaluation point falls outside the stored grid."""


class EmptyGrid(IlliqriskError):
    """A grid function has no nodes."""


class AbsoluteContinuityViolation(IlliqriskError):
    """Q puts mass on a scenario that has zero probability under P."""


class ConfigError(IlliqriskError):
    """The CLI run configuration is missing fields or out of range."""
