"""Numerical toolkit for decomposition spaces: coverings, partitions of unity, frames and admissibility checks."""

from .errors import (
    AliasingError,
    ConfigError,
    DecospaceError,
    InvariantFailure,
    LatticeOverflowError,
    MemoryBudgetError,
    NoContractionError,
    NumericGuardError,
)
from .grid import GridSpec, PrototypeSpec, SampledField, WeightSpec

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "ConfigError",
    "DecospaceError",
    "GridSpec",
    "InvariantFailure",
    "LatticeOverflowError",
    "MemoryBudgetError",
    "NoContractionError",
    "NumericGuardError",
    "PrototypeSpec",
    "SampledField",
    "WeightSpec",
]
