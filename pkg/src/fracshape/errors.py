"""Exception hierarchy shared by all modules."""


class FracShapeError(Exception):
    """Base class for library errors."""


class ConfigurationError(FracShapeError, ValueError):
    """Invalid grid size, shape or option."""


class DomainError(FracShapeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ImmersionViolation(FracShapeError):
    """A curve has (numerically) vanishing speed somewhere."""


class GenerationFailure(FracShapeError):
    """A rejection sampler gave up."""


class InnerSolveFailure(FracShapeError):
    """The implicit step of the discrete exponential map did not converge."""
