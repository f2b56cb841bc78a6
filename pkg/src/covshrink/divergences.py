"""Convex spectral divergences between PSD matrices and their scalar generators.

Each divergence kind binds three things:

* a scalar generator ``d(a, b)`` acting on matched eigenvalues,
* its partial derivative in the first argument, and
* a domain (which of ``a``, ``b`` must be strictly positive).

Matrix-level divergences are evaluated with the direct matrix formulas and
agree with ``sum_i d(x_i, y_i)`` on commuting diagonals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .linalg import as_sym_matrix

# Uniform relative threshold under which an eigenvalue counts as singular.
SPECTRAL_SINGULARITY_RTOL = 1e-12
# Eigenvalues of inner Wasserstein products below this are rejected outright;
# milder negatives are treated as PSD drift and clipped to zero.
PSD_DRIFT_ATOL = 1e-10


class DivergenceKind(enum.Enum):
    """The five supported divergences; values are the CLI spellings."""

    KULLBACK_LEIBLER = "kl"
    WASSERSTEIN = "wasserstein"
    SYMMETRIZED_STEIN = "sstein"
    SQUARED_FROBENIUS = "sqfrob"
    WEIGHTED_FROBENIUS = "wfrob"

    @classmethod
    def from_name(cls, name: str) -> "DivergenceKind":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise InvalidInputError(
                f"unknown divergence {name!r}; expected one of: {valid}"
            ) from None


# Matrix domains, used in error messages ("S+" = PSD cone, "S++" = PD cone).
MATRIX_DOMAINS = {
    DivergenceKind.KULLBACK_LEIBLER: "S++ x S++",
    DivergenceKind.WASSERSTEIN: "S+ x S+",
    DivergenceKind.SYMMETRIZED_STEIN: "S++ x S++",
    DivergenceKind.SQUARED_FROBENIUS: "S+ x S+",
    DivergenceKind.WEIGHTED_FROBENIUS: "S+ x S++",
}

# Kinds whose generator (and matrix divergence) needs a strictly positive
# second argument.
_NEEDS_B_POSITIVE = frozenset({
    DivergenceKind.KULLBACK_LEIBLER,
    DivergenceKind.SYMMETRIZED_STEIN,
    DivergenceKind.WEIGHTED_FROBENIUS,
})
_NEEDS_A_POSITIVE = frozenset({
    DivergenceKind.KULLBACK_LEIBLER,
    DivergenceKind.SYMMETRIZED_STEIN,
})


def in_scalar_domain(kind: DivergenceKind, a: float, b: float) -> bool:
    """Whether (a, b) lies in the generator's domain."""
    if a < 0.0 or b < 0.0 or not (np.isfinite(a) and np.isfinite(b)):
        return False
    if kind in _NEEDS_A_POSITIVE and a == 0.0:
        return False
    if kind in _NEEDS_B_POSITIVE and b == 0.0:
        return False
    return True


def _check_scalar_domain(kind: DivergenceKind, a: float, b: float,
                         need_a_positive: bool = False) -> None:
    ok = in_scalar_domain(kind, a, b)
    if ok and need_a_positive and a == 0.0 and kind is DivergenceKind.WASSERSTEIN:
        ok = False
    if not ok:
        raise DomainError(
            kind,
            f"({a}, {b}) is outside the domain of the {kind.value} generator "
            f"(matrix domain {MATRIX_DOMAINS[kind]})",
            a=a, b=b,
        )


# Vectorized generator values/derivatives.  These assume the domain has been
# checked by the caller and are shared with the shrinkage solver's hot loops.

def _value_arr(kind: DivergenceKind, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if kind is DivergenceKind.KULLBACK_LEIBLER:
        r = a / b
        return 0.5 * (r - 1.0 - np.log(r))
    if kind is DivergenceKind.WASSERSTEIN:
        return np.square(np.sqrt(a) - np.sqrt(b))
    if kind is DivergenceKind.SYMMETRIZED_STEIN:
        return np.square(a - b) / (2.0 * a * b)
    if kind is DivergenceKind.SQUARED_FROBENIUS:
        return np.square(a - b)
    return np.square(a - b) / b


def _deriv_arr(kind: DivergenceKind, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if kind is DivergenceKind.KULLBACK_LEIBLER:
        return 0.5 * (1.0 / b - 1.0 / a)
    if kind is DivergenceKind.WASSERSTEIN:
        return 1.0 - np.sqrt(b / a)
    if kind is DivergenceKind.SYMMETRIZED_STEIN:
        return 0.5 * (1.0 / b - b / np.square(a))
    if kind is DivergenceKind.SQUARED_FROBENIUS:
        return 2.0 * (a - b)
    return 2.0 * (a - b) / b


def _deriv2_arr(kind: DivergenceKind, a, b):
    """Second a-derivative of the generator (domain assumed valid, a > 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if kind is DivergenceKind.KULLBACK_LEIBLER:
        return 0.5 / np.square(a)
    if kind is DivergenceKind.WASSERSTEIN:
        return 0.5 * np.sqrt(b) / (a * np.sqrt(a))
    if kind is DivergenceKind.SYMMETRIZED_STEIN:
        return b / (np.square(a) * a)
    if kind is DivergenceKind.SQUARED_FROBENIUS:
        return np.broadcast_to(2.0, np.broadcast_shapes(a.shape, b.shape)).copy()
    return 2.0 / b * np.ones_like(a * b)


def generator_value(kind: DivergenceKind, a: float, b: float) -> float:
    """Scalar generator d(a, b); non-negative, zero iff a == b."""
    _check_scalar_domain(kind, a, b)
    return float(_value_arr(kind, a, b))


def generator_deriv(kind: DivergenceKind, a: float, b: float) -> float:
    """Partial derivative of the generator in its first argument."""
    _check_scalar_domain(kind, a, b, need_a_positive=True)
    return float(_deriv_arr(kind, a, b))


@dataclass(frozen=True)
class GeneratorEval:
    """Generator value and derivative, or defined=False outside the domain."""

    value: float
    deriv_a: float
    defined: bool


def generator_eval(kind: DivergenceKind, a: float, b: float) -> GeneratorEval:
    """Non-raising combined evaluation of d(a, b) and its a-derivative."""
    if not in_scalar_domain(kind, a, b) or (
        kind is DivergenceKind.WASSERSTEIN and a == 0.0
    ):
        return GeneratorEval(float("nan"), float("nan"), False)
    return GeneratorEval(
        float(_value_arr(kind, a, b)), float(_deriv_arr(kind, a, b)), True
    )


def _eig_domain_ok(kind: DivergenceKind, eigenvalues: np.ndarray) -> bool:
    lam_min = float(eigenvalues[0])
    lam_max = float(eigenvalues[-1])
    if kind in (DivergenceKind.WASSERSTEIN, DivergenceKind.SQUARED_FROBENIUS):
        return lam_min >= -SPECTRAL_SINGULARITY_RTOL * max(abs(lam_max), 1.0)
    return lam_min > SPECTRAL_SINGULARITY_RTOL * max(lam_max, 0.0)


def domain_check(kind: DivergenceKind, matrix) -> bool:
    """Whether D(M, M) is finite, i.e. M is admissible as a nominal matrix."""
    m = as_sym_matrix(matrix)
    eigenvalues = np.linalg.eigvalsh(m)
    return _eig_domain_ok(kind, eigenvalues)


def _require_pd(kind: DivergenceKind, m: np.ndarray, side: str) -> None:
    lam = np.linalg.eigvalsh(m)
    if lam[0] <= SPECTRAL_SINGULARITY_RTOL * max(float(lam[-1]), 0.0):
        raise DomainError(
            kind,
            f"{side} argument of {kind.value} divergence must be positive "
            f"definite (domain {MATRIX_DOMAINS[kind]}); min eigenvalue "
            f"{lam[0]:.3e}",
            eigenvalue=float(lam[0]),
        )


def _require_psd(kind: DivergenceKind, m: np.ndarray, side: str) -> None:
    lam = np.linalg.eigvalsh(m)
    if lam[0] < -SPECTRAL_SINGULARITY_RTOL * max(abs(float(lam[-1])), 1.0):
        raise DomainError(
            kind,
            f"{side} argument of {kind.value} divergence must be positive "
            f"semidefinite (domain {MATRIX_DOMAINS[kind]}); min eigenvalue "
            f"{lam[0]:.3e}",
            eigenvalue=float(lam[0]),
        )


def matrix_divergence(kind: DivergenceKind, x, y) -> float:
    """Divergence D(X, Y) between symmetric PSD matrices.

    Uses the direct matrix formulas (trace/logdet/matrix square root), not
    eigenvalue matching, so non-commuting pairs are handled exactly.
    """
    x = as_sym_matrix(x)
    y = as_sym_matrix(y)
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {y.shape}")
    p = x.shape[0]

    if kind is DivergenceKind.KULLBACK_LEIBLER:
        _require_pd(kind, x, "first")
        _require_pd(kind, y, "second")
        tr = float(np.trace(np.linalg.solve(y, x)))
        logdet_x = float(np.linalg.slogdet(x)[1])
        logdet_y = float(np.linalg.slogdet(y)[1])
        return 0.5 * (tr - p + logdet_y - logdet_x)

    if kind is DivergenceKind.WASSERSTEIN:
        _require_psd(kind, x, "first")
        _require_psd(kind, y, "second")
        lam_x, v_x = np.linalg.eigh(x)
        root_x = (v_x * np.sqrt(np.clip(lam_x, 0.0, None))) @ v_x.T
        inner = root_x @ y @ root_x
        mu = np.linalg.eigvalsh(0.5 * (inner + inner.T))
        if mu[0] < -PSD_DRIFT_ATOL:
            raise DomainError(
                kind,
                f"inner product matrix has eigenvalue {mu[0]:.3e} below "
                f"-{PSD_DRIFT_ATOL:.0e}; arguments are not PSD",
                eigenvalue=float(mu[0]),
            )
        mu = np.clip(mu, 0.0, None)
        return float(np.trace(x) + np.trace(y) - 2.0 * np.sum(np.sqrt(mu)))

    if kind is DivergenceKind.SYMMETRIZED_STEIN:
        _require_pd(kind, x, "first")
        _require_pd(kind, y, "second")
        tr_yx = float(np.trace(np.linalg.solve(y, x)))
        tr_xy = float(np.trace(np.linalg.solve(x, y)))
        return 0.5 * (tr_yx + tr_xy - 2.0 * p)

    if kind is DivergenceKind.SQUARED_FROBENIUS:
        _require_psd(kind, x, "first")
        _require_psd(kind, y, "second")
        diff = x - y
        return float(np.sum(diff * diff))

    # Weighted Frobenius: Tr((X - Y)^2 Y^-1).
    _require_psd(kind, x, "first")
    _require_pd(kind, y, "second")
    diff = x - y
    return float(np.trace(np.linalg.solve(y, diff @ diff)))
