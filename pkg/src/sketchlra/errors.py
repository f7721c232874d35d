"""Exception types shared across the package."""


class SketchError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SketchError, ValueError):
    pass


class DimensionNotSupported(SketchError, ValueError):
    """A structured family cannot be built at the requested size."""


class ReducedRank(SketchError):
    """Orthogonalization met a column that is numerically dependent.

    ``q`` holds the orthonormal factor computed anyway and ``rank`` the number
    of columns that stayed above the tolerance.
    """

    def __init__(self, message, q=None, rank=None):
        super().__init__(message)
        self.q = q
        self.rank = rank


class NoConvergence(SketchError):
    pass


class ThetaTooLarge(SketchError, ValueError):
    pass


class ScheduleExhausted(SketchError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RankDeficientSketch(SketchError):
    pass


class GeneratorRankExceeded(SketchError):
    pass


class NotConverged(SketchError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(SketchError, ValueError):
    """Invalid experiment configuration; ``line`` points into the source file."""

    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class FlopBudgetExceeded(SketchError):
    pass
