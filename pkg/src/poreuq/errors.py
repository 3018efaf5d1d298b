"""Exception types raised across the package."""


class PoreUQError(Exception):
    """Base class for all package errors."""


class DomainError(PoreUQError, ValueError):
    """A closed-form expression was evaluated outside its domain."""


class ConstraintViolation(PoreUQError, ValueError):
    """Pore parameters violate the unit-cell geometric constraints."""


class EmptySupportError(PoreUQError, ValueError):
    """A conditional prior interval is empty for the given hyperparameters."""


class OutOfSupportError(PoreUQError, ValueError):
    """A parameter vector lies outside the support of the prior model."""


class DegenerateSampleError(PoreUQError, ValueError):
    """Samples have zero variance or are too few for the requested estimate."""


class ConvergenceError(PoreUQError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class DisconnectedPoreError(PoreUQError, ValueError):
    """The rasterized fluid region splits into several components."""


class RankDeficiencyError(PoreUQError, ValueError):
    """The least-squares design matrix does not have full column rank."""


class ZeroVarianceError(PoreUQError, ValueError):
    """A surrogate has no variance to decompose."""


class DimensionMismatchError(PoreUQError, ValueError):
    """Two sample sets have incompatible shapes."""


class PipelineError(PoreUQError, RuntimeError):
    """A pipeline stage failed or its inputs are missing."""


class ConvergenceWarning(UserWarning):
    """A Monte Carlo running mean is still drifting at the end of the trace."""
