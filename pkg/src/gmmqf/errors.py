"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class NotSPDError(ValueError):
    """A matrix that must be symmetric positive definite is not."""


class StepTooLargeError(ArithmeticError):
    """A retraction left the SPD cone; the caller should shrink the step."""


class NumericalError(ArithmeticError):
    """Irrecoverable numerical failure (e.g. eigendecomposition breakdown)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
