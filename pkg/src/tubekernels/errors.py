"""Exception hierarchy shared by all modules."""


class TubeKernelsError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(TubeKernelsError, ValueError):
    """Array shapes are inconsistent with each other or with the model."""


class ContractError(TubeKernelsError, ValueError):
    """An input violates a precondition, e.g. a matrix that is not symplectic."""


class DomainError(TubeKernelsError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class NumericalError(TubeKernelsError, ArithmeticError):
    """A numerical guard tripped (singular matrix, failed quadrature, ...).

    Parameters
    ----------
    message : str
    condition : float, optional
        Condition number or other diagnostic attached to the failure.
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class TruncationError(NumericalError):
    """A lattice sum would exceed the configured mode cap."""


class ConfigError(TubeKernelsError, ValueError):
    """Invalid experiment configuration."""
