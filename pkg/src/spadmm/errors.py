"""Exception types shared across the package."""


class SpadmmError(Exception):
    """Base class for all package-specific errors."""


class InputError(SpadmmError, ValueError):
    """Malformed input data: wrong shape, non-finite entries, bad dtype."""


class DimensionError(InputError):
    """Operands whose dimensions do not line up."""


class DomainError(SpadmmError, ValueError):
    """A mathematical precondition was violated (named in the message)."""


class ConfigError(SpadmmError, ValueError):
    """Inconsistent or unsupported solver/operator configuration."""


class NumericalError(SpadmmError, RuntimeError):
    """An iterative numerical routine failed to converge."""


class StepError(SpadmmError, RuntimeError):
    """A solver subproblem missed its certificate tolerance."""
