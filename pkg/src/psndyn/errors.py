"""Exception and warning types raised across the package."""


class InvalidNodeCount(ValueError):
    pass


class InvalidSchedule(ValueError):
    pass


class InvalidCounts(ValueError):
    pass


class SeriesTooShort(ValueError):
    pass


class MissingTrace(LookupError):
    pass


class NonDivisibleWindow(ValueError):
    pass


class AllZeroSpectrum(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class NoValidNeighbors(ValueError):
    pass


class UsageError(ValueError):
    pass


class DegenerateInput(UserWarning):
    """All windows identical: PCA returns zero projections."""
