"""Exception types raised across the package."""


class GeometryError(ValueError):
    """Raised for degenerate pitch geometry (zero distance, undefined angle)."""


class SchemaError(ValueError):
    """Raised when an input file does not match the expected column schema."""


class DesignError(ValueError):
    """Raised for empty subsets or rank-deficient design matrices."""


class KernelError(ValueError):
    """Raised when the spatial correlation matrix is singular or not factorizable."""


class ChainError(RuntimeError):
    """Raised when a Gibbs sweep produces a non-finite state."""

    def __init__(self, message, sweep=None):
        super().__init__(message)
        self.sweep = sweep
