"""Exception hierarchy.

Every error raised on purpose by the package derives from ``RcError`` so
callers (and the CLI) can separate invalid input from computation outcomes.
"""


class RcError(Exception):
    """Base class for all package errors."""


class InvalidInput(RcError, ValueError):
    """Malformed data or parameters (maps to CLI exit code 2)."""


class AssumptionViolation(InvalidInput):
    """A plant or controller violates a modelling assumption."""


# lti
class DenominatorZeroOnGrid(RcError):
    pass


class RootFindingFailure(RcError):
    pass


class ZeroOnUnitCircle(AssumptionViolation):
    pass


class UnstablePlant(AssumptionViolation):
    pass


class AlgebraicLoop(RcError):
    pass


# timestamping
class LengthMismatch(InvalidInput):
    pass


class InvalidParameters(InvalidInput):
    pass


# repetitive control
class PreviewExceedsBuffer(InvalidInput):
    pass


class DuplicateFrequency(InvalidInput):
    pass


# stability
class GridTooCoarse(RcError):
    pass


class GridMismatch(InvalidInput):
    pass


class SingularReturnDifference(RcError):
    pass


# design
class DesignFailure(RcError):
    """Design could not meet its criteria; ``iterations`` holds the log."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = list(iterations or [])


class NominalDesignInfeasible(DesignFailure):
    pass


class DesignExhausted(DesignFailure):
    pass


# simulation
class IllPosedLoop(AssumptionViolation):
    pass


class TooFewStamps(InvalidInput):
    pass


class HorizonTooShort(InvalidInput):
    pass
