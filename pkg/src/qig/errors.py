"""Exception hierarchy shared by all modules.

Numerical failures (degeneracy, divergence, non-convergence) derive from
:class:`NumericalError` so that the command-line runner can map them onto a
single exit status.
"""


class QigError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(QigError, ValueError):
    """Invalid or unknown configuration content."""


class NumericalError(QigError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class BoundaryDivergenceError(NumericalError):
    """The Fisher metric diverges: a probability vanishes while its derivative does not."""


class InconsistencyError(NumericalError):
    """Two routes to the same quantity disagree, or a PSD result is not PSD."""


class UnphysicalTangentError(NumericalError):
    """A state tangent has weight outside the block reachable from the support of the state."""


class NonDifferentiableError(NumericalError):
    """Finite-difference derivatives do not converge at the requested point."""


class DegenerateGroundStateError(NumericalError):
    """The ground state is degenerate, so ground-state perturbation theory is undefined."""


class BandDegeneracyError(NumericalError):
    """The selected band touches another band somewhere on the grid."""


class IllConditionedManifoldError(NumericalError):
    """Too many grid points carry a non-positive metric determinant."""


class NonConvergenceError(NumericalError):
    """A refinement or quadrature check failed."""
