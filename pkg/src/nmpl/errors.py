"""Exception and warning types shared across the package."""


class NmplError(Exception):
    """Base class for errors raised by this package."""


class UndefinedAtOriginError(NmplError, ValueError):
    """A kernel density was requested at z = 0."""


class UnsupportedKindError(NmplError, TypeError):
    """The operation is not defined for this measure kind."""


class DivergenceError(NmplError, ArithmeticError):
    """An integral fails to converge under refinement."""


class TailUnintegrableError(DivergenceError):
    """The integrand grows too fast for the tail of the measure."""


class DegenerateFitError(NmplError, ValueError):
    """A scaling fit cannot be made (for instance a zero cone mass)."""


class PreconditionError(NmplError, ValueError):
    """An input violates a documented precondition."""


class UnboundedCoefficientError(NmplError, ValueError):
    """A coefficient is unbounded on the grid, so no stable step exists."""


class InstabilityError(NmplError, RuntimeError):
    """The explicit update broke the discrete maximum principle."""


class ConfigError(NmplError, ValueError):
    """Invalid or incomplete experiment configuration."""


class EmptyConeWarning(UserWarning):
    """The support of the measure misses the whole cone."""
