"""Exception hierarchy shared by every mpcc module."""


class MPCCError(Exception):
    """Base class for all mpcc errors."""


class DimensionMismatch(MPCCError, ValueError):
    pass


class BadDimensions(MPCCError, ValueError):
    pass


class BadArgs(MPCCError, ValueError):
    pass


class MissingBasis(MPCCError, ValueError):
    pass


class DegenerateCovariance(MPCCError, ValueError):
    pass


class NotConverged(MPCCError, RuntimeError):
    """The solver stopped at ``max_iters`` without a feasible sparse solution.

    The partial result is kept on ``result`` so the caller can decide
    whether to use it anyway.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RankDeficient(MPCCError, ArithmeticError):
    pass


class TooLarge(MPCCError, ValueError):
    pass


class CorruptRecord(MPCCError, ValueError):
    pass


class NotFound(MPCCError, KeyError):
    pass


class NotPrime(MPCCError, ValueError):
    pass


class BindFailure(MPCCError, OSError):
    pass


class DatasetMissing(MPCCError, FileNotFoundError):
    pass


class ParseError(MPCCError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class BadImage(MPCCError, ValueError):
    pass


class BasisMissing(MPCCError, ValueError):
    pass
