"""Lattice-sum kernels on tubes over flat tori and their leading-order asymptotics."""

from .errors import (ConfigError, ContractError, DimensionError, DomainError, NumericalError,
                     TruncationError, TubeKernelsError)
from .geometry import GroupAction, TorusModel, TubePoint
from .spectra import Cutoff, Isotype, poisson_kernel

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "DimensionError", "DomainError", "NumericalError", "TruncationError",
    "TubeKernelsError", "GroupAction", "TorusModel", "TubePoint", "Cutoff", "Isotype", "poisson_kernel",
]
