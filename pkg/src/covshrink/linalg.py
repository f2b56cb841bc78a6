"""Dense symmetric-matrix primitives: validation, spectral decomposition, norms.

All operations are pure functions over float64 numpy arrays.  A "symmetric
matrix" throughout this package is a square 2-D array accepted by
:func:`as_sym_matrix`, which tolerates floating-point ingestion noise up to
``SYMMETRY_ATOL`` and symmetrizes it away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularMatrixError

# Absolute tolerance for accepting an almost-symmetric matrix at construction.
SYMMETRY_ATOL = 1e-12
# Relative eigenvalue floor below which a matrix is treated as singular.
SINGULARITY_RTOL = 1e-14


def as_sym_matrix(values) -> np.ndarray:
    """Validate and symmetrize a square matrix.

    Entries must be finite and ``|A - A.T|`` must not exceed ``SYMMETRY_ATOL``
    anywhere; the returned array is ``(A + A.T) / 2``.

    Raises
    ------
    InvalidInputError
        If the input is not square, contains non-finite entries, or is
        asymmetric beyond tolerance.
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYMMETRY_ATOL:
        raise InvalidInputError(
            f"matrix is asymmetric: max |A - A.T| = {asym:.3e} > {SYMMETRY_ATOL:.0e}"
        )
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpair factorization A = basis @ diag(eigenvalues) @ basis.T.

    ``eigenvalues`` are sorted ascending and ``basis`` has orthonormal
    columns with a canonical sign: the largest-magnitude entry of each
    column is positive (first such entry on ties).
    """

    eigenvalues: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _canonicalize_signs(basis: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(basis), axis=0)
    pivots = basis[idx, np.arange(basis.shape[1])]
    signs = np.where(pivots < 0.0, -1.0, 1.0)
    return basis * signs


def spectral_decompose(a) -> SpectralDecomposition:
    """Eigendecompose a symmetric matrix with a deterministic convention.

    Eigenvalues ascending; eigenvector signs fixed so the largest-magnitude
    entry of each column is positive.  Backed by LAPACK's symmetric solver.
    """
    a = as_sym_matrix(a)
    eigenvalues, basis = np.linalg.eigh(a)
    return SpectralDecomposition(eigenvalues, _canonicalize_signs(basis))


def reconstruct(basis: np.ndarray, spectrum) -> np.ndarray:
    """Assemble basis @ diag(spectrum) @ basis.T, symmetrized.

    ``basis`` must be square with orthonormal columns and ``spectrum`` a
    length-p vector; dimensions are checked, orthonormality is trusted.
    """
    basis = np.asarray(basis, dtype=float)
    spectrum = np.asarray(spectrum, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise InvalidInputError(f"basis must be square, got shape {basis.shape}")
    if spectrum.ndim != 1 or spectrum.shape[0] != basis.shape[0]:
        raise InvalidInputError(
            f"spectrum length {spectrum.shape} does not match basis dim {basis.shape[0]}"
        )
    out = (basis * spectrum) @ basis.T
    return 0.5 * (out + out.T)


def trace(a) -> float:
    return float(np.trace(np.asarray(a, dtype=float)))


def frobenius_inner(a, b) -> float:
    """<A, B> = Tr(A.T B), computed entrywise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float), ord="fro"))


def condition_number(a) -> float:
    """Ratio of the largest to the smallest eigenvalue of an SPD matrix."""
    dec = spectral_decompose(a)
    lam_min = float(dec.eigenvalues[0])
    lam_max = float(dec.eigenvalues[-1])
    if lam_max <= 0.0 or lam_min <= SINGULARITY_RTOL * lam_max:
        raise SingularMatrixError(
            f"matrix is numerically singular: min eigenvalue {lam_min:.3e}, "
            f"max eigenvalue {lam_max:.3e}"
        )
    return lam_max / lam_min


def invert_spd(a) -> np.ndarray:
    """Inverse of an SPD matrix via reciprocal spectrum in the same basis."""
    dec = spectral_decompose(a)
    lam_min = float(dec.eigenvalues[0])
    lam_max = float(dec.eigenvalues[-1])
    if lam_max <= 0.0 or lam_min <= SINGULARITY_RTOL * lam_max:
        raise SingularMatrixError(
            f"matrix is numerically singular: min eigenvalue {lam_min:.3e}, "
            f"max eigenvalue {lam_max:.3e}"
        )
    return reconstruct(dec.basis, 1.0 / dec.eigenvalues)
