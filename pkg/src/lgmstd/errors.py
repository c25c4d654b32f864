"""Exception hierarchy.

Two families map onto the CLI exit codes: ``SpecError`` (bad input, exit 2)
and ``NumericalError`` (a computation broke down, exit 3).
"""


class LGMError(Exception):
    """Base class for all package errors."""


class SpecError(LGMError, ValueError):
    """The caller supplied an invalid specification."""


class NumericalError(LGMError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


# input validation
class NonSymmetric(SpecError):
    pass


class NegativeEigenvalue(SpecError):
    pass


class OrderTooLarge(SpecError):
    pass


class ZeroVarianceCovariate(SpecError):
    pass


class InvalidProbabilityVector(SpecError):
    pass


class TooFewLevels(SpecError):
    pass


class DisconnectedGraph(SpecError):
    pass


class UnsupportedFamily(SpecError):
    pass


class OutOfInterval(SpecError):
    pass


class KTooSmall(SpecError):
    pass


class UnsupportedOrder(SpecError):
    pass


class UnsupportedPrior(SpecError):
    pass


class AllZeroVariances(SpecError):
    pass


class InvalidDistribution(SpecError):
    pass


# numerical failures
class SingularConstraintGram(NumericalError):
    pass


class DegenerateConstant(NumericalError):
    pass


class ZeroConditionalVariance(NumericalError):
    pass


class DegenerateMomentPair(NumericalError):
    pass


class ProjectionRankMismatch(NumericalError):
    pass


class NonPDCovariance(NumericalError):
    pass


class GridMassEscape(NumericalError):
    pass


class NoConvergence(UserWarning):
    """Optimizer hit its iteration cap; the best point found is still returned."""
