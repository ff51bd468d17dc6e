"""Exception types raised across the package."""


class LevyBranchError(Exception):
    """Base class for all package errors."""


class ModelError(LevyBranchError, ValueError):
    """Invalid model parameters (wrong regime, heavy tail, bad measure)."""


class ConvergenceFailure(LevyBranchError, RuntimeError):
    pass


class NotConverged(ConvergenceFailure):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvalidRegime(ModelError):
    pass


class PathBudgetExceeded(LevyBranchError, RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"path {index}: {message}")
        self.index = index


class PopulationBudgetExceeded(LevyBranchError, RuntimeError):
    pass


class OrphanEvent(LevyBranchError, ValueError):
    pass


class QuadratureFailure(LevyBranchError, RuntimeError):
    pass


class UnsupportedMeasure(LevyBranchError, TypeError):
    pass


class UnsupportedHorizon(LevyBranchError, ValueError):
    pass


class DegenerateVariance(LevyBranchError, ValueError):
    pass


class InsufficientSamples(LevyBranchError, ValueError):
    pass


class ConfigError(LevyBranchError, ValueError):
    """Bad run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
