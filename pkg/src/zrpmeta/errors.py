"""Exception hierarchy for zrpmeta."""


class ZrpError(Exception):
    """Base class for all errors raised by this package."""


class NotIrreducible(ZrpError):
    pass


class NotReversible(ZrpError):
    pass


class InvalidMeasure(ZrpError):
    pass


class OverlappingSets(ZrpError):
    pass


class IndexOutOfRange(ZrpError, IndexError):
    pass


class EmptySource(ZrpError):
    pass


class SpaceTooLarge(ZrpError):
    pass


class DegenerateScale(ZrpError):
    pass


class WellsOverlap(ZrpError):
    pass


class SolverDiverged(ZrpError):
    pass


class InsufficientWells(ZrpError):
    pass


class EpsilonOutOfRange(ZrpError, ValueError):
    pass


class ConstraintViolated(ZrpError):
    pass


class DegenerateRange(ZrpError, ValueError):
    pass


class HorizonZero(ZrpError, ValueError):
    pass


class NotHitWithinHorizon(ZrpError):
    pass


class NeverInA(ZrpError):
    pass


class NeverInWells(NeverInA):
    pass


class TooFewTransitions(ZrpError):
    pass
