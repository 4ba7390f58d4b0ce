"""Exception hierarchy.

Validation problems (bad input) derive from :class:`ValidationError`;
numerical breakdowns derive from :class:`NumericalError`.  The CLI maps the
two families to exit codes 1 and 2.
"""


class MatSLError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(MatSLError, ValueError):
    pass


class NumericalError(MatSLError, ArithmeticError):
    pass


# -- validation -------------------------------------------------------------

class ShapeError(ValidationError):
    pass


class NotProjector(ValidationError):
    pass


class BadH(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class BadDiamond(ValidationError):
    pass


class IndexMismatch(ValidationError):
    pass


class IrrationalLengths(ValidationError):
    pass


class GraphError(ValidationError):
    pass


# -- numerical ----------------------------------------------------------------

class RootCountMismatch(NumericalError):
    pass


class ContourTooClose(NumericalError):
    pass


class ExpOverflow(NumericalError):
    pass


class MissedRootSuspicion(NumericalError):
    pass


class NearPole(NumericalError):
    pass


class GroupNotIsolated(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class RankMismatch(NumericalError):
    pass


class PoleHit(NumericalError):
    pass


class SingularCombination(NumericalError):
    pass


class RhoStarUnusable(NumericalError):
    pass


class OrientationConflict(NumericalError):
    pass


class NonRealResidual(UserWarning):
    """Issued (not raised) when a refined root keeps a visible imaginary part."""
