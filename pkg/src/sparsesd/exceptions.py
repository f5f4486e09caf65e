"""Exception types raised across the package."""


class SparseSDError(Exception):
    """Base class for all package errors."""


class RankDeficientError(SparseSDError, ValueError):
    """The matrix has no unique upper-triangular factor (or a singular LS system)."""


class NoConvergenceError(SparseSDError, RuntimeError):
    pass


class TooLargeError(SparseSDError, ValueError):
    """An exhaustive enumeration would exceed the configured size cap."""


class ExactOverflowError(SparseSDError, OverflowError):
    """An exact integer count exceeds the widest supported width."""
