"""Exception types shared across the package."""


class FourspecError(Exception):
    """Base class for all package errors."""


class ExpressionError(FourspecError):
    """Raised when a coefficient expression cannot be parsed or evaluated."""

    def __init__(self, message, token=None, position=None):
        self.token = token
        self.position = position
        super().__init__(message)


class CoefficientError(FourspecError):
    """Invalid coefficient data (non-finite samples, bad breakpoints, ...)."""


class IncompatibleKindError(CoefficientError):
    """Requested regularization matrix kind is not buildable from the model."""


class PropagationError(FourspecError):
    """Integration failure; carries the offending position and parameter."""

    def __init__(self, message, x=None, lam=None):
        self.x = x
        self.lam = lam
        super().__init__(message)


class SectorBoundaryError(FourspecError):
    """Ray lies on a sector boundary where the root ordering is ambiguous."""


class RootSearchError(FourspecError):
    """Zero localization failed (boundary zeros, window exhaustion, ...)."""


class PoleProximityError(FourspecError):
    """lambda too close to a pole of the Weyl matrix column k."""

    def __init__(self, message, k=None, lam=None):
        self.k = k
        self.lam = lam
        super().__init__(message)


class ContourError(FourspecError):
    """Laurent contour invalid (extra pole inside, non-convergent quadrature)."""


class ConfigError(FourspecError):
    """Malformed run configuration."""
