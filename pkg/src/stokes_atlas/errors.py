"""Exception hierarchy.

Two families: ``InputError`` for arguments outside an operation's domain
(the CLI maps these to exit code 1) and ``SolverError`` for numerical
failures (exit code 2).
"""


class StokesAtlasError(Exception):
    """Base class for every error raised by this package."""


class InputError(StokesAtlasError, ValueError):
    pass


class SolverError(StokesAtlasError, RuntimeError):
    pass


# -- input errors -----------------------------------------------------------

class OnCut(InputError):
    """Parameter lies on the cut where a period function is not single valued."""


class BoundaryRequired(InputError):
    """Parameter lies on [-1, 1]; a one-sided boundary value must be chosen."""


class DegenerateParameter(InputError):
    """The free zero coincides with -1 or +1 (double zero)."""


DegenerateZero = DegenerateParameter


class OutOfWorld(InputError):
    """Point lies outside the disk covered by a region map."""


# -- solver errors ----------------------------------------------------------

class NonConvergence(SolverError):
    """An iterative method missed its target."""


NoConvergence = NonConvergence


class BranchAmbiguity(NonConvergence):
    """Square-root continuation could not decide between the two roots."""


class StallDetected(NonConvergence):
    """A curve trace exhausted its step or arc-length budget."""


class CriticalPointHit(NonConvergence):
    """The level-set corrector stalled where the derivative vanishes."""


class StallNearZero(NonConvergence):
    """A ray trace collapsed its step next to a zero without a certified hit."""


class NotFound(NonConvergence):
    """A search exhausted its candidates."""


class NonPlanar(SolverError):
    """Traced edge geometries cross each other."""


class FaceClassificationAmbiguous(SolverError):
    """A face of the critical graph is neither a half-plane nor a strip."""


class AngleSnapFailure(SolverError):
    """A measured corner angle is too far from every admissible value."""


class InconsistentArrangement(SolverError):
    """Region counting disagrees between methods or grid resolutions."""
