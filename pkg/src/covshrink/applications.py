"""Experiment harnesses: radius-order validation, anomaly scoring, A/B
metric learning, and minimum-variance portfolio backtesting.

All randomized harnesses take a base seed and derive one independent stream
per replication, so every experiment is reproducible bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .divergences import DivergenceKind
from .errors import (
    DegenerateVarianceError,
    InvalidInputError,
    NonConvergenceError,
    SingularMatrixError,
    UnsupportedDivergenceError,
)
from .linalg import SINGULARITY_RTOL, as_sym_matrix
from .shrinkage import solve_dual_many
from .synthetic import Rng, make_ground_truth, sample_covariance, sample_mvn
from .tuning import PLUGIN_KINDS


@dataclass(frozen=True)
class RegressionFit:
    """Ordinary least squares line with its coefficient of determination."""

    slope: float
    intercept: float
    r_squared: float


def loglog_regress(points) -> RegressionFit:
    """OLS fit of log(rho) against log(n) for positive (n, rho) pairs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InvalidInputError("need at least 3 (n, rho) pairs")
    if np.any(pts <= 0.0) or not np.all(np.isfinite(pts)):
        raise InvalidInputError("all regression points must be positive reals")
    x = np.log(pts[:, 0])
    y = np.log(pts[:, 1])
    xc = x - x.mean()
    var_x = float(np.sum(xc * xc))
    if var_x == 0.0:
        raise InvalidInputError("regression abscissae are all identical")
    slope = float(np.sum(xc * y)) / var_x
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid * resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionFit(slope, intercept, float(np.clip(r2, 0.0, 1.0)))


def _spectral_combined_losses(shrunk: np.ndarray, cross: np.ndarray,
                              tau_true: float) -> np.ndarray:
    """Combined loss of V diag(s) V.T against a reference, batched over rows.

    ``cross`` holds diag(V.T Sigma0 V); the identity
    <f(Sigma), Sigma0> = sum_i f(s_i) * cross_i makes every term spectral.
    """
    logdet = np.sum(np.log(shrunk), axis=1)
    stein_cross = np.sum(cross[None, :] / shrunk, axis=1)
    frob = np.sum(shrunk * shrunk, axis=1) - 2.0 * np.sum(
        shrunk * cross[None, :], axis=1
    )
    return logdet + stein_cross + 0.5 * tau_true * frob


def radius_scaling_experiment(kind: DivergenceKind, p: int, n_list, repeats: int,
                              grid, seed: int):
    """Empirical optimal-radius scaling against sample size.

    For each n: draw samples from a fixed random-basis ground truth with
    spectrum (1..p), form the second-moment covariance, set the weight to
    p/||S_n||_F^2, and grid-search the radius minimizing the mean combined
    loss over the repeats.  Returns ``(fit, rows)`` where ``fit`` regresses
    log(best radius) on log(n) and ``rows`` holds one record per n.
    """
    if kind not in PLUGIN_KINDS:
        raise UnsupportedDivergenceError(
            f"radius scaling is run for {', '.join(k.value for k in PLUGIN_KINDS)}; "
            f"got {kind.value}"
        )
    n_values = [int(n) for n in n_list]
    if len(n_values) < 3:
        raise InvalidInputError("need at least 3 sample sizes for the regression")
    if p < 2 or any(n < 2 for n in n_values):
        raise InvalidInputError("need p >= 2 and every n >= 2")
    if repeats < 1:
        raise InvalidInputError("need at least one repeat")
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any(grid <= 0.0):
        raise InvalidInputError("radius grid must be positive")

    master = Rng(seed)
    sigma0 = make_ground_truth(p, master)
    tau_true = p / float(np.sum(sigma0 * sigma0))

    rows = []
    for n_idx, n in enumerate(n_values):
        loss_sum = np.zeros(grid.size)
        for r in range(repeats):
            rng = Rng(seed + 1 + n_idx * repeats + r)
            x = sample_mvn(sigma0, n, rng)
            s_hat = sample_covariance(x, "uncentered")
            lam, basis = np.linalg.eigh(s_hat)
            lam = np.clip(lam, 0.0, None)
            tau_hat = p / float(np.sum(s_hat * s_hat))
            _, shrunk, _, _ = solve_dual_many(kind, tau_hat, lam, grid)
            cross = np.einsum("ji,jk,ki->i", basis, sigma0, basis)
            loss_sum += _spectral_combined_losses(shrunk, cross, tau_true)
        mean_loss = loss_sum / repeats
        best = int(np.argmin(mean_loss))
        rows.append({
            "n": n,
            "rho_best": float(grid[best]),
            "mean_loss": float(mean_loss[best]),
        })
    fit = loglog_regress([(row["n"], row["rho_best"]) for row in rows])
    return fit, rows


def rx_scores(pixels, mu, precision) -> np.ndarray:
    """Mahalanobis anomaly score of each row against (mu, precision)."""
    pixels = np.asarray(pixels, dtype=float)
    mu = np.asarray(mu, dtype=float)
    precision = as_sym_matrix(precision)
    if pixels.ndim != 2:
        raise InvalidInputError(f"expected (n, p) pixel rows, got shape {pixels.shape}")
    p = pixels.shape[1]
    if mu.shape != (p,) or precision.shape != (p, p):
        raise InvalidInputError(
            f"dimension mismatch: pixels are {p}-dimensional, mu {mu.shape}, "
            f"precision {precision.shape}"
        )
    diff = pixels - mu
    return np.einsum("ij,jk,ik->i", diff, precision, diff)


def auc(scores, labels) -> float:
    """Rank-based area under the ROC curve with tie correction.

    Equals P(score_1 > score_0) + P(score_1 = score_0)/2 over class pairs.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InvalidInputError("scores and labels must be 1-D of equal length")
    pos = labels == 1
    neg = labels == 0
    n1 = int(np.count_nonzero(pos))
    n0 = int(np.count_nonzero(neg))
    if n1 + n0 != scores.size:
        raise InvalidInputError("labels must be 0 or 1")
    if n1 == 0 or n0 == 0:
        raise InvalidInputError("both classes must be present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg_ranks = ends - (counts - 1) / 2.0
    ranks = avg_ranks[inverse]
    rank_sum = float(np.sum(ranks[pos]))
    return (rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0)


def _centered_stats(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidInputError("each group needs an (n >= 2, p) sample matrix")
    return x.mean(axis=0), sample_covariance(x, "centered")


def ab_learn_weights(experiments, cov_transform=None) -> np.ndarray:
    """Average of unit-normalized per-experiment discriminant directions.

    Each experiment is a pair (X_A, X_B) of sample matrices; the direction
    solves ``(f(S_A) + f(S_B)) w = mu_B - mu_A`` with ``f`` an optional
    covariance-matrix transform (identity by default).  Zero directions are
    skipped with a warning.
    """
    if cov_transform is None:
        cov_transform = lambda s: s
    weights = []
    count = 0
    for x_a, x_b in experiments:
        count += 1
        mu_a, cov_a = _centered_stats(x_a)
        mu_b, cov_b = _centered_stats(x_b)
        m = as_sym_matrix(cov_transform(cov_a) + cov_transform(cov_b))
        lam = np.linalg.eigvalsh(m)
        if lam[-1] <= 0.0 or lam[0] <= SINGULARITY_RTOL * lam[-1]:
            raise SingularMatrixError(
                f"pooled covariance is numerically singular "
                f"(min eigenvalue {lam[0]:.3e}); use a shrinkage transform"
            )
        w = np.linalg.solve(m, mu_b - mu_a)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            warnings.warn(
                f"experiment {count} has a zero discriminant direction; skipped",
                stacklevel=2,
            )
            continue
        weights.append(w / norm)
    if not weights:
        raise InvalidInputError("all experiments produced zero directions")
    return np.mean(weights, axis=0)


def ab_zscore(w, x_a, x_y) -> float:
    """Normalized mean gap of the projected groups (centered covariances)."""
    w = np.asarray(w, dtype=float)
    mu_a, cov_a = _centered_stats(x_a)
    mu_y, cov_y = _centered_stats(x_y)
    if w.shape != mu_a.shape or mu_a.shape != mu_y.shape:
        raise InvalidInputError("weight/group dimensions disagree")
    var = float(w @ cov_a @ w + w @ cov_y @ w)
    if var <= 0.0:
        raise DegenerateVarianceError("projected variance vanished")
    return float(w @ (mu_y - mu_a)) / np.sqrt(var)


def ab_synthetic_experiment(n: int, cov_transform=None, *, features: int = 50,
                            k_train: int = 100, k_test: int = 200,
                            recognizable: float = 0.6, seed: int = 0) -> dict:
    """Seeded synthetic A/B benchmark.

    Control groups draw from N(0, S1) and treatments from N(mu, S2), where
    mu is standard normal and S1, S2 are sums of 100 standard-normal outer
    products each.  Training uses ``k_train`` A/B pairs; the test mixes
    recognizable A/B pairs with A/A pairs and scores the learned direction
    by the AUC of its z-scores.
    """
    if n < 2:
        raise InvalidInputError("group size must be >= 2")
    if not 0.0 < recognizable < 1.0:
        raise InvalidInputError("recognizable fraction must lie in (0, 1)")
    p = int(features)
    rng = Rng(seed)
    mu = rng.normals(p)
    g1 = rng.normals(100 * p).reshape(100, p)
    g2 = rng.normals(100 * p).reshape(100, p)
    sigma1 = g1.T @ g1
    sigma2 = g2.T @ g2

    train = []
    for _ in range(k_train):
        x_a = sample_mvn(sigma1, n, rng)
        x_b = mu + sample_mvn(sigma2, n, rng)
        train.append((x_a, x_b))
    w = ab_learn_weights(train, cov_transform)

    n_pos = int(round(recognizable * k_test))
    labels = np.zeros(k_test, dtype=int)
    labels[:n_pos] = 1
    zscores = np.empty(k_test)
    for i in range(k_test):
        x_a = sample_mvn(sigma1, 200, rng)
        if labels[i] == 1:
            x_y = mu + sample_mvn(sigma2, 200, rng)
        else:
            x_y = sample_mvn(sigma1, 200, rng)
        zscores[i] = ab_zscore(w, x_a, x_y)
    return {
        "auc": auc(zscores, labels),
        "weights": w,
        "zscores": zscores,
        "labels": labels,
        "n": int(n),
        "features": p,
    }


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - css / idx > 0.0)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


PORTFOLIO_MAX_ITER = 100_000
PORTFOLIO_STEP_TOL = 1e-10
PORTFOLIO_KKT_TOL = 1e-6


def min_variance_portfolio(sigma) -> np.ndarray:
    """Long-only minimum-variance weights: argmin w' S w on the simplex.

    Projected gradient descent with exact simplex projection and step
    1/(2 lambda_max); the returned point satisfies the first-order
    optimality conditions to within ``PORTFOLIO_KKT_TOL``.
    """
    sigma = as_sym_matrix(sigma)
    p = sigma.shape[0]
    lam = np.linalg.eigvalsh(sigma)
    if lam[0] < -1e-10 * max(abs(float(lam[-1])), 1.0):
        raise InvalidInputError(
            f"covariance must be PSD; min eigenvalue {lam[0]:.3e}"
        )
    w = np.full(p, 1.0 / p)
    lam_max = float(lam[-1])
    if lam_max <= 0.0:
        return w
    step = 1.0 / (2.0 * lam_max)
    for _ in range(PORTFOLIO_MAX_ITER):
        grad = 2.0 * (sigma @ w)
        w_new = simplex_project(w - step * grad)
        moved = float(np.linalg.norm(w_new - w))
        w = w_new
        if moved < PORTFOLIO_STEP_TOL:
            break
    grad = 2.0 * (sigma @ w)
    tol = PORTFOLIO_KKT_TOL * max(1.0, float(np.max(np.abs(grad))))
    support = w > 1e-9
    mu_lo = float(np.min(grad[support]))
    mu_hi = float(np.max(grad[support]))
    off_ok = True
    if np.any(~support):
        off_ok = float(np.min(grad[~support])) >= mu_lo - tol
    if mu_hi - mu_lo > tol or not off_ok:
        raise NonConvergenceError(
            "projected gradient did not reach the optimality certificate"
        )
    return w


@dataclass(frozen=True)
class BacktestReport:
    """Rolling-window backtest outputs: per-period returns and summary."""

    monthly_returns: np.ndarray
    average_return: float
    sharpe: float
    sortino: float
    cumulative_return: float
    weights_history: np.ndarray = field(repr=False)


def performance_metrics(monthly_returns) -> dict:
    """Summary statistics of a monthly return series.

    average_return: annualized percent, 12 * mean * 100.
    sharpe: mean over sample std (ddof=1); +inf when dispersion is zero.
    sortino: mean over root mean squared downside; +inf with no downside.
    cumulative: (prod(1 + r) - 1) * 100.
    """
    r = np.asarray(monthly_returns, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise InvalidInputError("need at least two returns")
    mean = float(np.mean(r))
    std = float(np.std(r, ddof=1))
    sharpe = mean / std if std > 0.0 else float("inf")
    downside = float(np.sqrt(np.mean(np.minimum(r, 0.0) ** 2)))
    sortino = mean / downside if downside > 0.0 else float("inf")
    return {
        "average_return": 12.0 * mean * 100.0,
        "sharpe": sharpe,
        "sortino": sortino,
        "cumulative": (float(np.prod(1.0 + r)) - 1.0) * 100.0,
    }


def rolling_backtest(returns, window: int, cov_estimator) -> BacktestReport:
    """Monthly rebalanced minimum-variance backtest.

    At each period t >= window the covariance is estimated from the
    preceding ``window`` rows by ``cov_estimator`` and the portfolio is
    rebalanced to the long-only minimum-variance weights.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2:
        raise InvalidInputError(f"expected (T, p) returns, got shape {returns.shape}")
    t_len, p = returns.shape
    if window < 2 or t_len <= window:
        raise InvalidInputError(
            f"need window >= 2 and more than {window} periods, got {t_len}"
        )
    realized = np.empty(t_len - window)
    weights = np.empty((t_len - window, p))
    for i, t in enumerate(range(window, t_len)):
        est = as_sym_matrix(cov_estimator(returns[t - window:t]))
        w = min_variance_portfolio(est)
        weights[i] = w
        realized[i] = float(w @ returns[t])
    metrics = performance_metrics(realized)
    return BacktestReport(
        monthly_returns=realized,
        average_return=metrics["average_return"],
        sharpe=metrics["sharpe"],
        sortino=metrics["sortino"],
        cumulative_return=metrics["cumulative"],
        weights_history=weights,
    )
