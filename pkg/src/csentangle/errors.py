"""Exception types raised across the package."""


class ModeMismatchError(ValueError):
    """A phase point or label does not have the model's number of modes."""


class TrajectoryEscapeError(RuntimeError):
    """The complexified flow left the allowed region or became non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class FocalPointError(ArithmeticError):
    """A tangent-matrix block needed for a prefactor is singular."""


class ShootingError(RuntimeError):
    """No initial guess converged to a boundary-value solution."""

    def __init__(self, message, best_residual=float("inf"), failures=()):
        super().__init__(message)
        self.best_residual = best_residual
        self.failures = tuple(failures)


class PipelineInconsistencyError(ArithmeticError):
    """The semiclassical purity came out with a large imaginary part."""


class CutoffError(ValueError):
    """A Fock-space truncation discards more probability than allowed."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""
