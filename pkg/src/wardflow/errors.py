"""Exception types shared across the package."""


class WardflowError(Exception):
    """Base class for package-specific errors."""


class ParameterError(WardflowError, ValueError):
    """An argument or parameter value is outside its legal range."""


class StructuralError(WardflowError):
    """Inputs are structurally incompatible (wrong length, unknown name, bad schema)."""


class ValidationError(WardflowError):
    """A bound parameter vector violates model invariants."""


class IngestionError(WardflowError):
    """A data file could not be ingested; the message names the offending row or date."""


class SimulationError(WardflowError):
    """The engine could not complete a patient path (e.g. cyclic custom graph)."""


class FitError(WardflowError):
    """Surrogate fitting failed on degenerate or singular training data."""


class AnalysisError(WardflowError):
    """Sensitivity analysis cannot run on the supplied evaluation log."""
