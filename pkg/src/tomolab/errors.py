"""Exception hierarchy.

Everything raised on purpose by tomolab derives from :class:`TomolabError`.
The CLI maps :class:`ConfigError` to exit code 2 and every other subclass to
exit code 3.
"""


class TomolabError(Exception):
    """Base class for all tomolab errors."""


class ConfigError(TomolabError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(TomolabError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a special function."""


class CylinderOverflowError(NumericalError, OverflowError):
    """Bessel function value not representable in double precision."""


class SingularityError(NumericalError):
    """Green's function requested at coincident source and observation points."""


class FrequencyMismatchError(TomolabError, ValueError):
    """Objects built for different frequencies were combined."""


class SingularSystemError(NumericalError):
    """Lippmann-Schwinger system matrix is singular to working precision."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NonphysicalScattererError(NumericalError, ValueError):
    """Scattering potential implies a non-positive squared sound speed."""


class PhantomDomainError(TomolabError, ValueError):
    """Phantom blob reaches outside the scattering domain."""


class ZeroDenominatorError(NumericalError, ZeroDivisionError):
    """Relative discrepancy requested against an identically zero reference."""


class GridMismatchError(TomolabError, ValueError):
    """Fields defined on different grids or angle sets were combined."""


class TruncationError(TomolabError, ValueError):
    """Angular truncation order exceeds what the ring sampling supports."""


class ExportError(TomolabError, OSError):
    """A field dump could not be written or read; the message names the path."""
