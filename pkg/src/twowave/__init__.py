"""Two-wave quadratic NLS under mass resonance: ground states, evolution, blow-up."""

__version__ = "0.1.0"

from .errors import (DataFileError, NoProjection, NumericalFault, SolverFailure, TwoWaveError,
                     UnsupportedDimension, UnsupportedRegime, ValidationError)
from .functionals import FieldPair, PhysParams
from .radial import RadialGrid, make_grid

__all__ = [
    "__version__",
    "DataFileError", "NoProjection", "NumericalFault", "SolverFailure", "TwoWaveError",
    "UnsupportedDimension", "UnsupportedRegime", "ValidationError",
    "FieldPair", "PhysParams", "RadialGrid", "make_grid",
]
