"""Exception types shared across the package."""


class PulsefrontError(Exception):
    """Base class for all package-specific errors."""


class GridError(PulsefrontError):
    """Invalid cell geometry or grid resolution."""


class MediaError(PulsefrontError):
    """Coefficient construction rejected (bad samples, wrong class, ...)."""


class ClassError(MediaError):
    """Operation called with a nonlinearity class it is not defined for."""


class AdmissibilityError(PulsefrontError):
    """Test function violates admissibility (monotonicity in s)."""


class TailError(PulsefrontError):
    """Tail limits unavailable and window values have not stabilized."""


class NoConvergenceError(PulsefrontError):
    """Iterative eigensolve did not reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BracketError(PulsefrontError):
    """No minimizer bracket found within the allowed search range."""


class ShootingError(PulsefrontError):
    """Planar-front shooting failed to bracket the wave speed."""


class CFLError(PulsefrontError):
    """Time step violates the explicit stability bound."""


class NoFrontError(PulsefrontError):
    """Simulation produced no travelling interface over the fit window."""


class BinningError(PulsefrontError):
    """Front extraction left gaps in the s-coverage."""


class ConfigError(PulsefrontError):
    """Malformed experiment configuration."""
