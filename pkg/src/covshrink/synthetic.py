"""Seeded synthetic data generation and closed-form Monte-Carlo oracles.

Reproducibility contract
------------------------
``Rng`` wraps numpy's counter-based Philox bit generator and derives all
variates from its raw 64-bit stream with fixed arithmetic, so a seed pins
the stream across platforms and numpy versions:

* uniforms on (0, 1]:  ``((raw >> 11) + 1) * 2**-53``
* standard normals: Box-Muller pairs ``r*cos(theta), r*sin(theta)`` with
  ``r = sqrt(-2 ln u1)``, ``theta = 2 pi u2``, interleaved; for an odd
  request the trailing half-pair is discarded (no cross-call caching).

Parallel Monte Carlo uses one independently seeded ``Rng`` per replication
(``seed = base_seed + replication_index``).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .linalg import as_sym_matrix, spectral_decompose

_U53 = 2.0 ** -53


class Rng:
    """Deterministic random stream (single-owner, mutable state)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.Philox(self.seed)

    def uniforms(self, n: int) -> np.ndarray:
        """n i.i.d. uniforms on the half-open interval (0, 1]."""
        raw = self._bits.random_raw(int(n))
        return ((raw >> np.uint64(11)) + np.uint64(1)) * _U53

    def normals(self, n: int) -> np.ndarray:
        """n i.i.d. standard normals via Box-Muller."""
        n = int(n)
        if n == 0:
            return np.empty(0)
        pairs = (n + 1) // 2
        u1 = self.uniforms(pairs)
        u2 = self.uniforms(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


def random_orthogonal(p: int, rng: Rng) -> np.ndarray:
    """Haar-distributed p x p orthogonal matrix (QR of a Gaussian matrix)."""
    if p < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {p}")
    g = rng.normals(p * p).reshape(p, p)
    q, r = np.linalg.qr(g)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * signs


def make_ground_truth(p: int, rng: Rng) -> np.ndarray:
    """Random-basis covariance with eigenvalues exactly (1, 2, ..., p)."""
    if p < 2:
        raise InvalidInputError(f"dimension must be >= 2, got {p}")
    v = random_orthogonal(p, rng)
    lam = np.arange(1.0, p + 1.0)
    out = (v * lam) @ v.T
    return 0.5 * (out + out.T)


def sample_mvn(sigma0, n: int, rng: Rng) -> np.ndarray:
    """n rows drawn i.i.d. from N(0, sigma0); sigma0 may be singular.

    Sampling goes through the eigendecomposition ``V diag(sqrt(lam)) z``
    rather than a Cholesky factor so that PSD matrices of any rank are
    admissible.  Eigenvalues in [-1e-10, 0) are treated as exact zeros;
    anything more negative raises ``InvalidInputError``.
    """
    if n < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {n}")
    sigma0 = as_sym_matrix(sigma0)
    dec = spectral_decompose(sigma0)
    lam = dec.eigenvalues
    if lam[0] < -1e-10:
        raise InvalidInputError(
            f"covariance is indefinite: min eigenvalue {lam[0]:.3e}"
        )
    lam = np.clip(lam, 0.0, None)
    p = dec.dim
    z = rng.normals(n * p).reshape(n, p)
    return z @ (dec.basis * np.sqrt(lam)).T


def sample_covariance(x, mode: str = "uncentered") -> np.ndarray:
    """Sample covariance of an (n, p) observation matrix.

    mode="uncentered": X.T X / n (second-moment form).
    mode="centered":   (X-mean).T (X-mean) / (n-1).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"expected an (n, p) sample matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("sample matrix contains non-finite entries")
    n = x.shape[0]
    if mode == "uncentered":
        if n < 1:
            raise InvalidInputError("uncentered covariance needs n >= 1")
        out = x.T @ x / n
    elif mode == "centered":
        if n < 2:
            raise InvalidInputError("centered covariance needs n >= 2")
        xc = x - x.mean(axis=0)
        out = xc.T @ xc / (n - 1)
    else:
        raise InvalidInputError(f"unknown covariance mode {mode!r}")
    return 0.5 * (out + out.T)


def wishart_sqmoment_oracle(sigma0, n: int) -> np.ndarray:
    """Closed-form E[S_n^2] for S_n the uncentered Gaussian sample covariance.

    With n i.i.d. draws from N(0, sigma0):
        E[S_n^2] = sigma0^2 / n + Tr(sigma0) sigma0 / n + sigma0^2.
    Used only as a Monte-Carlo test oracle.
    """
    if n < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {n}")
    sigma0 = as_sym_matrix(sigma0)
    sq = sigma0 @ sigma0
    return sq / n + (np.trace(sigma0) / n) * sigma0 + sq
