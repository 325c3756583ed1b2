"""Exception types shared across the package."""


class HfsemError(Exception):
    """Base class for all package errors."""


class DimensionError(HfsemError, ValueError):
    """Array shapes or sizes are inconsistent."""


class NotPositiveDefiniteError(HfsemError, ValueError):
    """A matrix required to be positive definite is not."""


class ModelError(HfsemError, ValueError):
    """A structural matrix violates a model requirement (e.g. singular I - B)."""


class SimulationError(HfsemError, RuntimeError):
    """Path simulation produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DataError(HfsemError, ValueError):
    """Observed data contains non-finite or malformed rows."""


class ConsistencyError(HfsemError, ValueError):
    """Fixed entries of a parameter mask were violated."""


class ConfigError(HfsemError, ValueError):
    """A configuration document is malformed or references missing pieces."""
