"""Exception hierarchy.  Every error carries a stable ``name`` used by the CLI."""


class TwoWaveError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(TwoWaveError, ValueError):
    """Arguments outside the documented range."""


class UnsupportedDimension(ValidationError):
    """Operation requires a dimension range the input does not satisfy."""


class UnsupportedRegime(ValidationError):
    """Physical parameters violate a resonance condition the operation needs."""


class NumericalFault(TwoWaveError, ArithmeticError):
    """NaN/Inf appeared where finite values were required."""


class NoProjection(TwoWaveError):
    """The interaction term is nonnegative, so no rescaling reaches Q = 0."""


class SolverFailure(TwoWaveError):
    """Base class for ground-state solver failures."""


class NewtonDiverged(SolverFailure):
    pass


class SolutionEscaped(SolverFailure):
    pass


class TrivialSolution(SolverFailure):
    pass


class ProjectionLost(SolverFailure):
    pass


class MaxIterations(SolverFailure):
    pass


class DataFileError(TwoWaveError):
    """A data or config file is missing, unreadable or malformed."""
