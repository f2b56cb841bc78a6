"""Shrinkage target and radius selection.

The target weight ``tau_star = p / ||Sigma||_F^2`` makes the scalar target
carry the same Frobenius norm as the reference matrix.  For the
Kullback-Leibler, Wasserstein and symmetrized Stein divergences the
asymptotically optimal radius behaves like ``rho_star / n^2`` with a
spectrum-dependent constant; ``plug_in_radius`` evaluates that constant on
an empirical matrix.  A seeded grid search is provided for empirical
tuning against an arbitrary loss oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergences import DivergenceKind
from .errors import (
    InvalidInputError,
    ScalarMatrixError,
    SingularMatrixError,
    UnsupportedDivergenceError,
    ZeroMatrixError,
)
from .linalg import SINGULARITY_RTOL, as_sym_matrix

# Generators with a nonvanishing expected gradient at the truth; only these
# admit the 1/n^2 plug-in radius (both Frobenius variants are excluded).
PLUGIN_KINDS = (
    DivergenceKind.KULLBACK_LEIBLER,
    DivergenceKind.WASSERSTEIN,
    DivergenceKind.SYMMETRIZED_STEIN,
)

# 60 log-spaced radii on [1e-5, 2e3], the default empirical search interval.
DEFAULT_RADIUS_GRID = np.logspace(np.log10(1e-5), np.log10(2e3), 60)

_SCALAR_SPREAD_RTOL = 1e-12


@dataclass(frozen=True)
class TuningResult:
    """Selected weight and radius for a given divergence and sample size."""

    kind: DivergenceKind
    n: int
    tau_star: float
    target_scale: float
    rho_star_constant: float
    rho_n: float


def tau_star(sigma) -> float:
    """Optimal target weight p / ||Sigma||_F^2."""
    sigma = as_sym_matrix(sigma)
    sq = float(np.sum(sigma * sigma))
    if sq == 0.0:
        raise ZeroMatrixError("tau_star is undefined for the zero matrix")
    return sigma.shape[0] / sq


def _pd_nonscalar_spectrum(sigma) -> np.ndarray:
    sigma = as_sym_matrix(sigma)
    lam = np.linalg.eigvalsh(sigma)
    if lam[-1] <= 0.0 or lam[0] <= SINGULARITY_RTOL * lam[-1]:
        raise SingularMatrixError(
            f"matrix must be positive definite; min eigenvalue {lam[0]:.3e}"
        )
    if lam[-1] - lam[0] <= _SCALAR_SPREAD_RTOL * lam[-1]:
        raise ScalarMatrixError(
            "matrix is numerically a scaled identity; the radius constant's "
            "denominator vanishes"
        )
    return lam


def rho_star_asymptotic(kind: DivergenceKind, sigma0) -> float:
    """Constant of the 1/n^2-order radius, from the spectrum of sigma0.

    With eigenvalues ``lam`` and ``ts = p / sum(lam^2)``:

    * Kullback-Leibler:
        (p+1)^2 (sum lam^-2)^2 / (16 gap^2) * sum (1 - ts lam^2)^2,
        gap = sum lam^-2 - p^2 / sum lam^2
    * symmetrized Stein: the same expression with 32 in place of 16
    * Wasserstein:
        (p+1)^2 p^2 / (256 wgap^2) * sum (1 - ts lam^2)^2 / lam,
        wgap = sum 1/lam - (p / sum lam^2) sum lam
    """
    if kind not in PLUGIN_KINDS:
        raise UnsupportedDivergenceError(
            f"the asymptotic radius constant is defined only for "
            f"{', '.join(k.value for k in PLUGIN_KINDS)}; got {kind.value}"
        )
    lam = _pd_nonscalar_spectrum(sigma0)
    p = lam.size
    ts = p / float(np.sum(lam * lam))
    mismatch = (1.0 - ts * lam * lam) ** 2
    if kind is DivergenceKind.WASSERSTEIN:
        wgap = float(np.sum(1.0 / lam)) - ts * float(np.sum(lam))
        return (
            (p + 1.0) ** 2 * p * p * float(np.sum(mismatch / lam))
            / (256.0 * wgap * wgap)
        )
    inv_sq = float(np.sum(1.0 / (lam * lam)))
    gap = inv_sq - p * ts
    common = (p + 1.0) ** 2 * inv_sq * inv_sq * float(np.sum(mismatch)) / (gap * gap)
    divisor = 16.0 if kind is DivergenceKind.KULLBACK_LEIBLER else 32.0
    return common / divisor


def plug_in_radius(kind: DivergenceKind, sigma, n: int) -> TuningResult:
    """Evaluate the plug-in weight and 1/n^2 radius on a given matrix.

    The matrix is used as-is (true covariance or an empirical estimate);
    no eigenvalue de-biasing is applied before plugging in.
    """
    if n < 1:
        raise InvalidInputError(f"sample size must be >= 1, got {n}")
    sigma = as_sym_matrix(sigma)
    rho_const = rho_star_asymptotic(kind, sigma)
    ts = tau_star(sigma)
    return TuningResult(
        kind=kind,
        n=int(n),
        tau_star=ts,
        target_scale=1.0 / np.sqrt(ts),
        rho_star_constant=rho_const,
        rho_n=rho_const / (n * n),
    )


def grid_search_radius(grid, loss_oracle):
    """Minimize a loss oracle over a radius grid; ties go to the smaller radius.

    Returns ``(rho_best, losses)`` with ``losses`` aligned to the grid
    sorted ascending.  An oracle failure is re-raised with the offending
    radius prepended to its message.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("radius grid must be a non-empty 1-D array")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0.0):
        raise InvalidInputError("all grid radii must be positive reals")
    order = np.sort(grid)
    losses = []
    for rho in order.tolist():
        try:
            losses.append(float(loss_oracle(rho)))
        except Exception as exc:
            exc.args = (f"radius grid search failed at rho={rho!r}: {exc}",)
            raise
    best = int(np.argmin(losses))
    return float(order[best]), np.asarray(losses)
