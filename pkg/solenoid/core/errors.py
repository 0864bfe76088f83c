"""Exception hierarchy shared by every solenoid module."""


class SolenoidError(Exception):
    """Base class for all errors raised by solenoid."""


class DimensionMismatchError(SolenoidError, ValueError):
    """Two objects that must live in the same R^n do not."""


class EmptyChargeError(SolenoidError, ValueError):
    """An operation needs a charge with at least one atom."""


class DegenerateCurveError(SolenoidError, ValueError):
    """A curve has fewer than two samples."""


class LipschitzViolationError(SolenoidError, ValueError):
    """A polyline moves faster than unit speed between samples."""


class UnsupportedRegionError(SolenoidError, TypeError):
    """Occupation times are only exact for balls and half-spaces."""


class QuadratureLimitError(SolenoidError, ValueError):
    """Tensor Gauss-Hermite quadrature requested above its dimension limit."""


class UncertifiedPairError(SolenoidError, ValueError):
    """A divergence pair failed its certification threshold."""


class EmptyPanelError(SolenoidError, ValueError):
    """A panel without the probes an operation needs."""


class InvalidParameterError(SolenoidError, ValueError):
    """A parameter object violates its invariants."""


class NonFiniteDriftError(SolenoidError, ArithmeticError):
    """The drift produced NaN or inf during integration."""


class FileFormatError(SolenoidError, ValueError):
    """A charge, ensemble, config or report file could not be parsed."""
