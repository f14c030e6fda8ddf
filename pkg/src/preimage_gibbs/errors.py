"""Exception hierarchy shared by every module."""


class GibbsError(Exception):
    """Base class for all package errors."""


class PhaseSpaceMismatch(GibbsError, TypeError):
    """A torus object was combined with a shift object (or vice versa)."""


class InvalidMeasure(GibbsError, ValueError):
    pass


class EmptyDictionary(GibbsError, ValueError):
    pass


class SingularMatrix(GibbsError, ValueError):
    pass


class IllegalWord(GibbsError, ValueError):
    pass


class CertificationError(GibbsError, ArithmeticError):
    """Newton branch-following failed or two branches collided.

    Raised when a perturbed toral map can no longer be certified to be
    |det A|-to-1 from the linear model (perturbation amplitude too large).
    """


class ResourceCapExceeded(GibbsError, RuntimeError):
    pass


class ConfigError(GibbsError, ValueError):
    pass
