"""Exception types shared across the package."""


class RgksError(Exception):
    """Base class for all package errors."""


class RankDeficient(RgksError):
    """A QR factorization met a (numerically) dependent column.

    ``column`` is the 0-based index of the offending column.
    """

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"rank deficiency at column {column}")


class Breakdown(RgksError):
    """A Krylov recurrence norm vanished (exact invariant subspace reached).

    Carries the partially built factors so the caller can truncate.
    """

    def __init__(self, step: int, partial=None):
        self.step = step
        self.partial = partial
        super().__init__(f"breakdown at step {step}")


class SingularSystem(RgksError):
    """The projected system is rank deficient and no regularization was applied."""


class DimensionMismatch(RgksError):
    """Operator or vector dimensions are inconsistent."""


class BadPsf(RgksError):
    """A point-spread function failed validation (even dimensions or all zero)."""


class ResidualBreakdown(RgksError):
    """The normal-equations residual vanished; treated as convergence by solvers."""


class ConfigError(RgksError):
    """A run configuration failed to parse or validate."""


class SolverError(RgksError):
    """A solver run failed for a non-configuration reason."""
