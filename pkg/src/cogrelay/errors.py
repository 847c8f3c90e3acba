"""Exception types shared across the package."""


class CogrelayError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(CogrelayError, ValueError):
    """Operands have incompatible shapes."""


class RankDeficient(CogrelayError, ValueError):
    """A factorization met a numerically rank-deficient input."""


class NotPositiveDefinite(CogrelayError, ValueError):
    """A matrix required to be positive definite is not."""


class EmptyNullSpace(CogrelayError, ValueError):
    """Null-space basis requested for a matrix with trivial null space."""


class NearlyCollinearChannels(CogrelayError, ValueError):
    """Channel vectors too close to linear dependence for basis reduction."""


class ZFInfeasible(CogrelayError, ValueError):
    """Zero-forcing receive filter needs a nonempty null space (M >= 3)."""


class TrivialZeroRate(CogrelayError, ValueError):
    """Closed-form dual collapsed to the zero-secondary-rate edge case."""


class DegenerateChannels(CogrelayError, ValueError):
    """Closed-form solver hit collinear channels or a singular power system."""


class OutOfUncertaintyBall(CogrelayError, ValueError):
    """A channel error vector lies outside its declared uncertainty ball."""


class ProblemFormatError(CogrelayError, ValueError):
    """A conic problem or dump file violates the documented format."""
