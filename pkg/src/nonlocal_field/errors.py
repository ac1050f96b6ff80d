"""Exception hierarchy for the toolkit.

Everything raised on purpose derives from :class:`NonlocalFieldError` so
callers (and the CLI) can distinguish tool errors from genuine bugs.
"""


class NonlocalFieldError(Exception):
    """Base class for all toolkit errors."""


class DegenerateDomainError(NonlocalFieldError):
    """Domain bounds enclose zero volume."""


class InvalidExponentError(NonlocalFieldError):
    """Norm exponent outside [1, inf]."""


class GridMismatchError(NonlocalFieldError):
    """Operands live on different grids."""


class AsymmetricKernelError(NonlocalFieldError):
    """Custom kernel matrix fails the symmetry tolerance."""


class KernelSignError(NonlocalFieldError):
    """Kernel matrix has negative entries."""


class NumericalOverflowError(NonlocalFieldError):
    """A right-hand-side evaluation produced non-finite values."""


class InvalidStepError(NonlocalFieldError):
    """Time step must be strictly positive."""


class DivergenceError(NonlocalFieldError):
    """Trajectory left the space of finite fields."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class HypothesisViolationError(NonlocalFieldError):
    """A bound was requested outside its hypothesis (e.g. k1*beta*c1 >= 1)."""


class OutOfRangeError(NonlocalFieldError):
    """Inverse requested for a value outside the function's range."""


class PotentialDomainError(NonlocalFieldError):
    """State leaves the admissible ball where the potential is defined."""


class NoInteriorMinimumError(NonlocalFieldError):
    """Potential attains its minimum at the edge of the search interval."""


class NonConvergenceError(NonlocalFieldError):
    """Iteration exhausted its budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RefineFailureError(NonlocalFieldError):
    """Newton-Krylov refinement stagnated; fall back to damped fixed point."""


class ContractionFailureError(NonlocalFieldError):
    """Fixed-point iteration of the time-integral operator did not contract."""


class InvalidCertificateError(NonlocalFieldError):
    """Claimed sub/supersolution fails its defining differential inequality."""


class ScenarioError(NonlocalFieldError):
    """Scenario file is missing, malformed, or carries unknown keys."""


class ScenarioValidationError(ScenarioError):
    """Scenario is well-formed but requests an invalid combination."""
