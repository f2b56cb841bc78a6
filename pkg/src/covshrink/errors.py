"""Exception hierarchy shared by all covshrink modules."""

from __future__ import annotations


class CovShrinkError(Exception):
    """Base class for all library errors."""


class InvalidInputError(CovShrinkError):
    """Malformed or out-of-contract input (shape, sign, count, parse)."""


class SingularMatrixError(CovShrinkError):
    """Operation requires a (numerically) nonsingular matrix."""


class ZeroMatrixError(CovShrinkError):
    """Operation requires a nonzero matrix."""


class ScalarMatrixError(CovShrinkError):
    """Operation is degenerate for matrices proportional to the identity."""


class DegenerateVarianceError(CovShrinkError):
    """A variance term in a denominator vanished."""


class NonConvergenceError(CovShrinkError):
    """Iterative solver exhausted its iteration budget."""


class UnsupportedDivergenceError(CovShrinkError):
    """The requested divergence is not supported by this operation."""


class DomainError(CovShrinkError):
    """Arguments fall outside the divergence domain.

    Carries the offending scalar pair or eigenvalue so callers can report
    exactly which value violated the domain.
    """

    def __init__(self, kind, message: str, a: float | None = None,
                 b: float | None = None, eigenvalue: float | None = None):
        self.kind = kind
        self.a = a
        self.b = b
        self.eigenvalue = eigenvalue
        super().__init__(message)


class ScalarNominalWarning(UserWarning):
    """The nominal matrix is (numerically) a scaled identity.

    Shrinkage toward a scalar target is vacuous for such nominals; results
    are still returned but should be interpreted with care.
    """
