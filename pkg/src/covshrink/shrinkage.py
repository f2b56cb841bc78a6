"""Core nonlinear shrinkage solver.

Given a weight ``tau > 0``, a radius ``rho > 0`` and the ascending nominal
spectrum ``lam``, the solver produces the shrunk spectrum

    s_i = phi(tau, gamma_star, lam_i),

where ``phi(tau, gamma, b)`` is the unique positive root of

    1/a - tau*a - gamma * d'(a, b) = 0                               (*)

for the selected divergence generator ``d``, and ``gamma_star >= 0`` is the
unique root of the strictly decreasing dual function

    F(gamma) = sum_i d(phi(tau, gamma, lam_i), lam_i) = rho.

Every eigenvalue is pulled toward the target ``1/sqrt(tau)``: the root of
(*) always lies between ``b`` and ``1/sqrt(tau)``, which provides a
guaranteed bracket.  ``phi`` has closed forms for the Kullback-Leibler and
both Frobenius generators; the remaining kinds (and ``gamma_star`` itself)
are found by bracketed bisection with a guarded Newton fast path that falls
back to the midpoint whenever a Newton step would leave the bracket.  All
scalar equation work is vectorized so batches of problems (many radii
against one spectrum) solve in a single pass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .divergences import (
    MATRIX_DOMAINS,
    DivergenceKind,
    _deriv2_arr,
    _deriv_arr,
    _value_arr,
)
from .errors import (
    DomainError,
    InvalidInputError,
    NonConvergenceError,
    ScalarNominalWarning,
)

# Residual tolerance of the phi root, relative to |1/a| + |tau*a|.
PHI_RTOL = 1e-12
PHI_MAX_ITER = 200
# Dual tolerance: |F(gamma) - rho| <= DUAL_RTOL * max(1, rho).
DUAL_RTOL = 1e-8
DUAL_MAX_ITER = 500
# Relative spectrum spread below which a nominal counts as a scaled identity.
SCALAR_NOMINAL_RTOL = 1e-12
# Doubling rounds allowed when searching for a dual upper bound.
MAX_BOUND_DOUBLINGS = 64

_CLOSED_FORM_KINDS = frozenset({
    DivergenceKind.KULLBACK_LEIBLER,
    DivergenceKind.SQUARED_FROBENIUS,
    DivergenceKind.WEIGHTED_FROBENIUS,
})
_B_POSITIVE_KINDS = frozenset({
    DivergenceKind.KULLBACK_LEIBLER,
    DivergenceKind.SYMMETRIZED_STEIN,
    DivergenceKind.WEIGHTED_FROBENIUS,
})


def shrink_target(tau: float) -> float:
    """The common scalar target 1/sqrt(tau) toward which eigenvalues move."""
    if not (np.isfinite(tau) and tau > 0.0):
        raise InvalidInputError(f"tau must be a positive real, got {tau}")
    return 1.0 / math.sqrt(tau)


def _validate_gamma_b(kind: DivergenceKind, gamma: np.ndarray, b: np.ndarray):
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0.0):
        raise InvalidInputError("gamma must be finite and >= 0")
    if not np.all(np.isfinite(b)) or np.any(b < 0.0):
        raise InvalidInputError("b must be finite and >= 0")
    if kind in _B_POSITIVE_KINDS and np.any(b == 0.0):
        raise DomainError(
            kind,
            f"{kind.value} admits only strictly positive nominal eigenvalues "
            f"(matrix domain {MATRIX_DOMAINS[kind]})",
            b=0.0, eigenvalue=0.0,
        )


def _phi_closed(kind: DivergenceKind, tau: float, gamma, b):
    """Closed-form roots of (*) for the quadratic-reducible generators."""
    if kind is DivergenceKind.KULLBACK_LEIBLER:
        # 2*tau*b*a^2 + gamma*a - (2 + gamma)*b = 0; written cancellation-free.
        num = 2.0 * (2.0 + gamma) * b
        den = gamma + np.sqrt(gamma * gamma + 8.0 * tau * (2.0 + gamma) * b * b)
        return num / den
    if kind is DivergenceKind.SQUARED_FROBENIUS:
        # (tau + 2*gamma)*a^2 - 2*gamma*b*a - 1 = 0.
        q = tau + 2.0 * gamma
        gb = gamma * b
        return (gb + np.sqrt(gb * gb + q)) / q
    # Weighted Frobenius: (tau*b + 2*gamma)*a^2 - 2*gamma*b*a - b = 0.
    q = tau * b + 2.0 * gamma
    gb = gamma * b
    return (gb + np.sqrt(gb * gb + b * q)) / q


def _root_residual(kind: DivergenceKind, tau: float, gamma, b, a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs(1.0 / a - tau * a - gamma * _deriv_arr(kind, a, b))


def _ulp_refine(kind: DivergenceKind, tau: float, gamma, b, a):
    """Nudge each root to the neighboring float with the smallest residual."""
    up1 = np.nextafter(a, np.inf)
    dn1 = np.nextafter(a, 0.0)
    cands = np.stack([a, up1, dn1, np.nextafter(up1, np.inf), np.nextafter(dn1, 0.0)])
    res = _root_residual(kind, tau, gamma[None, ...], b[None, ...], cands)
    res = np.where(cands > 0.0, res, np.inf)
    pick = np.argmin(res, axis=0)
    return np.take_along_axis(cands, pick[None, ...], axis=0)[0]


def _phi_root_iter(kind: DivergenceKind, tau: float, gamma, b):
    """Bracketed Newton-bisection for (*) on [min(b, t), max(b, t)].

    The left side of (*) is strictly decreasing in ``a`` and changes sign
    across the bracket.  Each step probes the guarded Newton point when it
    stays inside the bracket and the midpoint otherwise; iteration ends at
    the residual tolerance or at floating-point resolution, whichever comes
    first, keeping the best iterate seen.
    """
    t = shrink_target(tau)
    gamma = np.asarray(gamma, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.minimum(b, t)
    hi = np.maximum(b, t)
    trivial = (gamma == 0.0) | (lo == hi)
    active = ~trivial
    x = 0.5 * (lo + hi)
    best = np.where(trivial, t, x)
    best_res = np.full(x.shape, np.inf)
    for _ in range(PHI_MAX_ITER):
        if not np.any(active):
            break
        # Inactive lanes get the harmless filler a=1 and are never read back.
        a = np.where(active, x, 1.0)
        g = 1.0 / a - tau * a - gamma * _deriv_arr(kind, a, b)
        res = np.abs(g)
        take = active & (res < best_res)
        best = np.where(take, a, best)
        best_res = np.where(take, res, best_res)
        tol = PHI_RTOL * (1.0 / a + tau * a)
        active &= ~(res <= tol)
        if not np.any(active):
            break
        go_up = g > 0.0
        lo = np.where(active & go_up, a, lo)
        hi = np.where(active & ~go_up, a, hi)
        mid = 0.5 * (lo + hi)
        slope = 1.0 / (a * a) + tau + gamma * _deriv2_arr(kind, a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = a + g / slope
        probe = np.where((newton > lo) & (newton < hi), newton, mid)
        # A probe equal to a bracket end means resolution is exhausted.
        active &= (probe > lo) & (probe < hi)
        x = probe
    else:
        if np.any(active):
            raise NonConvergenceError(
                f"phi iteration did not converge in {PHI_MAX_ITER} steps"
            )
    return np.where(trivial, t, best)


def _phi_core(kind: DivergenceKind, tau: float, gamma, b, method: str):
    t = shrink_target(tau)
    use_closed = kind in _CLOSED_FORM_KINDS and method in ("auto", "closed")
    if method == "closed" and kind not in _CLOSED_FORM_KINDS:
        raise InvalidInputError(f"{kind.value} has no closed-form eigenvalue mapping")
    if use_closed:
        out = _phi_closed(kind, tau, gamma, b)
        return np.where((gamma == 0.0) | (b == t), t, out)
    return _phi_root_iter(kind, tau, gamma, b)


def phi(kind: DivergenceKind, tau: float, gamma, b, method: str = "auto"):
    """Shrunk eigenvalue: the unique positive root of (*).

    ``gamma`` and ``b`` may be scalars or broadcastable arrays.  ``method``
    selects "auto" (closed form where one exists, else the bracketed
    iteration), "closed" (closed form only) or "bisect" (generic bracketed
    iteration for any kind, kept as an independent cross-check of the
    closed forms).  The returned root is refined to the neighboring float
    with the smallest defining residual.
    """
    t = shrink_target(tau)
    gamma_arr = np.asarray(gamma, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    _validate_gamma_b(kind, gamma_arr, b_arr)
    if method not in ("auto", "closed", "bisect"):
        raise InvalidInputError(f"unknown phi method {method!r}")
    scalar_out = gamma_arr.ndim == 0 and b_arr.ndim == 0
    gamma_arr, b_arr = np.broadcast_arrays(gamma_arr, b_arr)
    out = _phi_core(kind, tau, gamma_arr, b_arr, method)
    trivial = (gamma_arr == 0.0) | (b_arr == t)
    out = np.where(trivial, t, _ulp_refine(kind, tau, gamma_arr, b_arr, out))
    return float(out) if scalar_out else out


def _validate_spectrum(spectrum) -> np.ndarray:
    lam = np.asarray(spectrum, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise InvalidInputError("nominal spectrum must be a non-empty 1-D array")
    if not np.all(np.isfinite(lam)):
        raise InvalidInputError("nominal spectrum contains non-finite values")
    scale = max(float(np.max(np.abs(lam))), 1.0)
    if np.any(np.diff(lam) < -1e-12 * scale):
        raise InvalidInputError("nominal spectrum must be sorted ascending")
    if lam[0] < -1e-10 * scale:
        raise InvalidInputError(
            f"nominal spectrum has negative entries (min {lam[0]:.3e})"
        )
    return np.clip(lam, 0.0, None)


def rho_max(kind: DivergenceKind, tau: float, nominal_spectrum) -> float:
    """Largest meaningful radius: divergence from the target to the nominal.

    Equal to sum_i d(1/sqrt(tau), lam_i); at and beyond this radius the ball
    constraint is slack and the optimum collapses to the target matrix.
    """
    t = shrink_target(tau)
    lam = _validate_spectrum(nominal_spectrum)
    if kind in _B_POSITIVE_KINDS and lam[0] <= 0.0:
        raise DomainError(
            kind,
            f"{kind.value} requires a positive-definite nominal (matrix domain "
            f"{MATRIX_DOMAINS[kind]}); offending eigenvalue {lam[0]!r}",
            eigenvalue=float(lam[0]),
        )
    return float(np.sum(_value_arr(kind, t, lam)))


def dual_function(kind: DivergenceKind, tau: float, nominal_spectrum, gamma: float) -> float:
    """F(gamma) = sum_i d(phi(tau, gamma, lam_i), lam_i).

    Strictly decreasing from rho_max at gamma=0 toward 0, unless the nominal
    spectrum is constant at the target (then identically 0).
    """
    lam = _validate_spectrum(nominal_spectrum)
    s = phi(kind, tau, float(gamma), lam)
    return float(np.sum(_value_arr(kind, s, lam)))


def _dual_values(kind: DivergenceKind, tau: float, lam: np.ndarray,
                 gammas: np.ndarray) -> np.ndarray:
    s = _phi_core(kind, tau, gammas[:, None], np.broadcast_to(lam, (gammas.size, lam.size)), "auto")
    return np.sum(_value_arr(kind, s, lam[None, :]), axis=1)


def _dual_values_grad(kind: DivergenceKind, tau: float, lam: np.ndarray,
                      gammas: np.ndarray):
    """F and dF/dgamma, the latter via the implicit derivative of phi."""
    lam_b = np.broadcast_to(lam, (gammas.size, lam.size))
    g_col = gammas[:, None]
    s = _phi_core(kind, tau, g_col, lam_b, "auto")
    f = np.sum(_value_arr(kind, s, lam_b), axis=1)
    d1 = _deriv_arr(kind, s, lam_b)
    slope = 1.0 / (s * s) + tau + g_col * _deriv2_arr(kind, s, lam_b)
    fp = -np.sum(d1 * d1 / slope, axis=1)
    return f, fp


def closed_form_gamma_bound(kind: DivergenceKind, tau: float, rho,
                            nominal_spectrum) -> np.ndarray | float:
    """Analytic upper bound for the dual root, per divergence kind.

    Valid whenever lam_min < 1/sqrt(tau) < lam_max; ``rho`` may be an array.
    """
    lam = _validate_spectrum(nominal_spectrum)
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0.0):
        raise InvalidInputError("rho must be positive")
    scalar_out = rho_arr.ndim == 0
    rho_arr = np.atleast_1d(rho_arr)
    p = lam.size
    lam1 = float(lam[0])
    lamp = float(lam[-1])
    shrink_factor = (1.0 - tau * lamp * lamp) ** 2

    if kind is DivergenceKind.KULLBACK_LEIBLER:
        out = np.maximum(2.0 * p / rho_arr,
                         (2.0 * tau * lamp * lamp + 1.0) / np.expm1(rho_arr / p))
    elif kind is DivergenceKind.WASSERSTEIN:
        def w_bound(eta):
            return (eta + np.sqrt(eta * eta + 16.0 * eta * tau ** 2.5)) / (8.0 * tau * tau)

        out = np.maximum(w_bound(p / rho_arr), w_bound(p * shrink_factor / rho_arr))
    elif kind is DivergenceKind.SYMMETRIZED_STEIN:
        base = p * lamp * lamp / (2.0 * rho_arr * lam1 ** 4)
        out = np.sqrt(np.maximum(base, base * shrink_factor))
    elif kind is DivergenceKind.SQUARED_FROBENIUS:
        def sf_bound(c):
            head = c * p / (4.0 * rho_arr)
            return head + np.sqrt(head * head + tau * head)

        out = np.maximum(sf_bound(1.0), sf_bound(shrink_factor))
    else:
        base = p * lamp / (4.0 * rho_arr * lam1 * lam1)
        out = np.sqrt(np.maximum(base, base * shrink_factor))
    return float(out[0]) if scalar_out else out


def _gamma_bounds_verified(kind: DivergenceKind, tau: float, lam: np.ndarray,
                           rhos: np.ndarray) -> np.ndarray:
    """Per-problem gamma upper bounds with F(bound) <= rho guaranteed.

    Starts from the analytic bound when its hypothesis holds, otherwise from
    1, and doubles until the dual function drops below the radius.
    """
    t = shrink_target(tau)
    if float(lam[0]) < t < float(lam[-1]):
        start = np.atleast_1d(
            np.asarray(closed_form_gamma_bound(kind, tau, rhos, lam), dtype=float)
        ).copy()
    else:
        start = np.ones_like(rhos)
    # Keep the starting bound in a range where phi stays overflow-free.
    start = np.clip(start, np.finfo(float).tiny, 1e100)
    need = _dual_values(kind, tau, lam, start) > rhos
    for _ in range(MAX_BOUND_DOUBLINGS):
        if not np.any(need):
            return start
        start[need] *= 2.0
        idx = np.nonzero(need)[0]
        need[idx] = _dual_values(kind, tau, lam, start[idx]) > rhos[idx]
    raise NonConvergenceError(
        f"no dual upper bound found after {MAX_BOUND_DOUBLINGS} doublings"
    )


def gamma_upper_bound(kind: DivergenceKind, tau: float, rho: float,
                      nominal_spectrum) -> float:
    """A gamma with F(gamma) <= rho, bracketing the dual root from above."""
    lam = _validate_spectrum(nominal_spectrum)
    if not (np.isfinite(rho) and rho > 0.0):
        raise InvalidInputError(f"rho must be a positive real, got {rho}")
    if rho >= rho_max(kind, tau, lam):
        return 0.0
    return float(_gamma_bounds_verified(kind, tau, lam, np.array([rho]))[0])


@dataclass(frozen=True)
class ShrinkageProblem:
    """One dual problem: divergence kind, weight tau, radius rho, spectrum."""

    kind: DivergenceKind
    tau: float
    rho: float
    nominal_spectrum: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise InvalidInputError(f"tau must be a positive real, got {self.tau}")
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise InvalidInputError(f"rho must be a positive real, got {self.rho}")
        object.__setattr__(
            self, "nominal_spectrum", _validate_spectrum(self.nominal_spectrum)
        )

    @property
    def is_scalar_nominal(self) -> bool:
        """True when the spectrum is constant to within 1e-12 relative."""
        lam = self.nominal_spectrum
        spread = float(lam[-1] - lam[0])
        top = float(lam[-1])
        return spread <= SCALAR_NOMINAL_RTOL * top if top > 0.0 else True


@dataclass(frozen=True)
class DualSolution:
    """Solved dual: multiplier, shrunk spectrum and residual diagnostics."""

    gamma_star: float
    shrunk_spectrum: np.ndarray
    rho_max: float
    binding: bool
    dual_residual: float
    phi_residuals: float = field(default=0.0)


def _bisect_gamma(kind: DivergenceKind, tau: float, lam: np.ndarray,
                  rhos: np.ndarray, his: np.ndarray):
    """Bracketed Newton-bisection of F(gamma) = rho over a batch of radii.

    F is strictly decreasing with F(0) > rho >= F(hi); a Newton probe is
    used while it stays inside the current bracket, the midpoint otherwise.
    """
    m = rhos.size
    lo = np.zeros(m)
    hi = his.copy()
    tol = DUAL_RTOL * np.maximum(1.0, rhos)
    gam = np.zeros(m)
    fval = np.zeros(m)
    x = 0.5 * hi
    active = np.ones(m, dtype=bool)
    for _ in range(DUAL_MAX_ITER):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        f, fp = _dual_values_grad(kind, tau, lam, x[idx])
        err = f - rhos[idx]
        gam[idx] = x[idx]
        fval[idx] = f
        done = np.abs(err) <= tol[idx]
        go_up = err > 0.0
        keep = ~done
        lo[idx] = np.where(go_up & keep, x[idx], lo[idx])
        hi[idx] = np.where(~go_up & keep, x[idx], hi[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x[idx] - err / fp
        mid = 0.5 * (lo[idx] + hi[idx])
        inside = (newton > lo[idx]) & (newton < hi[idx]) & np.isfinite(newton)
        probe = np.where(inside, newton, mid)
        stuck = keep & ((probe <= lo[idx]) | (probe >= hi[idx]))
        if np.any(stuck):
            raise NonConvergenceError(
                "dual iteration stalled at floating-point resolution "
                "before meeting tolerance"
            )
        x[idx] = probe
        active[idx] = keep
    else:
        raise NonConvergenceError(
            f"dual iteration did not converge in {DUAL_MAX_ITER} steps"
        )
    return gam, fval


def solve_dual_many(kind: DivergenceKind, tau: float, nominal_spectrum, rhos):
    """Solve a batch of radii against one spectrum.

    Returns ``(gammas, shrunk, binding, rho_mx)`` where ``shrunk`` has one
    row per radius.  Radii at or above ``rho_mx`` take the unbinding branch
    (gamma 0, all eigenvalues at the target).  No scalar-nominal warning is
    emitted here; use :func:`solve_dual` for the diagnosed single-problem
    path.
    """
    lam = _validate_spectrum(nominal_spectrum)
    rhos = np.asarray(rhos, dtype=float)
    if rhos.ndim != 1 or rhos.size < 1:
        raise InvalidInputError("rhos must be a non-empty 1-D array")
    if np.any(~np.isfinite(rhos)) or np.any(rhos <= 0.0):
        raise InvalidInputError("all radii must be positive reals")
    t = shrink_target(tau)
    rho_mx = rho_max(kind, tau, lam)
    m = rhos.size
    gammas = np.zeros(m)
    shrunk = np.full((m, lam.size), t)
    binding = rhos < rho_mx
    idx = np.nonzero(binding)[0]
    if idx.size:
        his = _gamma_bounds_verified(kind, tau, lam, rhos[idx])
        gam, _ = _bisect_gamma(kind, tau, lam, rhos[idx], his)
        gammas[idx] = gam
        shrunk[idx] = phi(kind, tau, gam[:, None], lam[None, :])
    return gammas, shrunk, binding, rho_mx


def solve_dual(problem: ShrinkageProblem) -> DualSolution:
    """Solve one dual problem to the stated tolerances.

    Radii at or above rho_max land on the unbinding branch with gamma 0 and
    every eigenvalue at the target; a scalar nominal triggers a
    ``ScalarNominalWarning`` (the shrinkage direction is then degenerate).
    """
    if problem.is_scalar_nominal:
        warnings.warn(
            "nominal spectrum is numerically a scaled identity; shrinkage "
            "toward a scalar target is degenerate for it",
            ScalarNominalWarning,
            stacklevel=2,
        )
    kind, tau, lam = problem.kind, problem.tau, problem.nominal_spectrum
    gammas, shrunk, binding, rho_mx = solve_dual_many(
        kind, tau, lam, np.array([problem.rho])
    )
    gamma_star = float(gammas[0])
    s = shrunk[0]
    is_binding = bool(binding[0])
    if is_binding:
        dual_residual = abs(
            float(np.sum(_value_arr(kind, s, lam))) - problem.rho
        )
    else:
        dual_residual = 0.0
    phi_res = float(np.max(_root_residual(kind, tau, gamma_star, lam, s)))
    return DualSolution(
        gamma_star=gamma_star,
        shrunk_spectrum=s,
        rho_max=rho_mx,
        binding=is_binding,
        dual_residual=dual_residual,
        phi_residuals=phi_res,
    )
