"""Exception types raised across the package."""


class SidebandCatError(Exception):
    """Base class for all package errors."""


class TruncationError(SidebandCatError):
    """Fock-space truncation discards more norm than the allowed tolerance."""


class CutoffMismatch(SidebandCatError):
    pass


class PoleError(SidebandCatError):
    """Spectrum evaluated on (or numerically at) a pole."""


class GridError(SidebandCatError):
    """Time grid too coarse or too short for the requested response."""


class GridMismatch(SidebandCatError):
    pass


class ApproximationDomain(SidebandCatError):
    """Small-modulation approximation used outside its validity range."""


class ConfigError(SidebandCatError):
    pass


class CalibrationMissing(SidebandCatError):
    pass


class PhaseCoverage(SidebandCatError):
    """Quadrature data does not cover enough of the phase circle."""


class NonConvergence(SidebandCatError):
    """Iterative estimator hit its iteration cap without meeting tolerance."""
