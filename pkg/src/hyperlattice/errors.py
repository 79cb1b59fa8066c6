"""Exception and warning types raised across the package."""


class HyperlatticeError(Exception):
    """Base class for all package errors."""


class SubsetHyperedge(HyperlatticeError, ValueError):
    pass


class DuplicateHyperedge(HyperlatticeError, ValueError):
    pass


class NonPositiveServiceRate(HyperlatticeError, ValueError):
    pass


class InvalidSystem(HyperlatticeError, ValueError):
    pass


class UnknownHyperedge(HyperlatticeError, KeyError):
    pass


class CountOverflow(HyperlatticeError, OverflowError):
    """A combinatorial count does not fit in an unsigned 64-bit integer."""


class IndexOutOfRange(HyperlatticeError, IndexError):
    pass


class LevelExceedsK(HyperlatticeError, ValueError):
    pass


class NotPairwiseOverlaps(HyperlatticeError, ValueError):
    pass


class DimensionOverflow(HyperlatticeError, MemoryError):
    pass


class SingularSystem(HyperlatticeError, ArithmeticError):
    pass


class NonErgodic(HyperlatticeError, ValueError):
    """Aggregate load lambda/mu >= 1, so no stationary law exists."""


class ZeroTotalRate(HyperlatticeError, ZeroDivisionError):
    pass


class MissingGeometry(HyperlatticeError, ValueError):
    pass


class ShapeMismatch(HyperlatticeError, ValueError):
    pass


class TooManyServers(HyperlatticeError, ValueError):
    pass


class UncoveredBeat(HyperlatticeError, ValueError):
    pass


class NonErgodicWarning(UserWarning):
    pass


class MaxIterationsExceeded(UserWarning):
    """Power iteration hit its budget; the best iterate is returned."""


class SweepPointFailed(HyperlatticeError, RuntimeError):
    """A sweep grid point raised; ``index`` and ``value`` identify it."""

    def __init__(self, index, value, cause):
        super().__init__(f"grid point {index} (value {value!r}) failed: {cause}")
        self.index = index
        self.value = value
