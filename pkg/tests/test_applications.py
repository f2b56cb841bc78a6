import numpy as np
import pytest

from covshrink import (
    DivergenceKind,
    InvalidInputError,
    Rng,
    UnsupportedDivergenceError,
    ab_learn_weights,
    ab_synthetic_experiment,
    ab_zscore,
    auc,
    loglog_regress,
    make_ground_truth,
    min_variance_portfolio,
    performance_metrics,
    radius_scaling_experiment,
    rolling_backtest,
    rx_scores,
    random_orthogonal,
    sample_covariance,
    sample_mvn,
    simplex_project,
)

KL = DivergenceKind.KULLBACK_LEIBLER


class TestLogLogRegress:
    def test_exact_inverse_square(self):
        ns = np.array([10.0, 20.0, 50.0, 100.0])
        fit = loglog_regress(np.column_stack([ns, ns**-2.0]))
        assert fit.slope == pytest.approx(-2.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_constant_gives_zero_slope(self):
        ns = np.array([10.0, 20.0, 50.0])
        fit = loglog_regress(np.column_stack([ns, np.full(3, 5.0)]))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_noise_lowers_r_squared(self):
        pts = np.array([[10.0, 1.0], [20.0, 0.5], [40.0, 0.9], [80.0, 0.1]])
        fit = loglog_regress(pts)
        assert 0.0 <= fit.r_squared < 1.0

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            loglog_regress([[10.0, 1.0], [20.0, 0.5]])

    def test_degenerate_abscissa(self):
        with pytest.raises(InvalidInputError):
            loglog_regress([[10.0, 1.0], [10.0, 0.5], [10.0, 0.7]])


class TestRadiusScalingExperiment:
    def test_small_run_reproducible(self):
        grid = np.logspace(-4, 2, 15)
        fit1, rows1 = radius_scaling_experiment(KL, 3, [20, 40, 80], 3, grid, seed=5)
        fit2, rows2 = radius_scaling_experiment(KL, 3, [20, 40, 80], 3, grid, seed=5)
        assert fit1 == fit2 and rows1 == rows2
        assert fit1.slope < 0.0
        assert {"n", "rho_best", "mean_loss"} <= set(rows1[0])

    def test_needs_three_sample_sizes(self):
        with pytest.raises(InvalidInputError):
            radius_scaling_experiment(KL, 3, [50], 2, [0.1, 1.0], seed=0)

    def test_frobenius_kinds_rejected(self):
        with pytest.raises(UnsupportedDivergenceError):
            radius_scaling_experiment(
                DivergenceKind.SQUARED_FROBENIUS, 3, [10, 20, 40], 2, [0.1], seed=0
            )


class TestRxScores:
    def test_zero_at_mean(self):
        scores = rx_scores(np.array([[1.0, 2.0]]), np.array([1.0, 2.0]), np.eye(2))
        assert scores[0] == pytest.approx(0.0)

    def test_unit_vector(self):
        scores = rx_scores(np.array([[1.0, 0.0]]), np.zeros(2), np.eye(2))
        assert scores[0] == pytest.approx(1.0)

    def test_hand_case(self):
        scores = rx_scores(np.array([[1.0, 1.0]]), np.zeros(2), np.diag([4.0, 1.0]))
        assert scores[0] == pytest.approx(5.0)

    def test_rotation_invariance(self):
        rng = Rng(3)
        x = rng.normals(40).reshape(10, 4)
        mu = rng.normals(4)
        prec = make_ground_truth(4, rng)
        r = random_orthogonal(4, rng)
        base = rx_scores(x, mu, prec)
        rotated = rx_scores(x @ r.T, r @ mu, r @ prec @ r.T)
        assert np.allclose(rotated, base, rtol=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            rx_scores(np.ones((3, 2)), np.zeros(3), np.eye(2))


def brute_force_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect(self):
        assert auc([0.1, 0.2, 0.9, 0.8], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc([1.0, 1.0, 1.0, 1.0], [0, 1, 0, 1]) == 0.5

    def test_anti_separated(self):
        assert auc([0.9, 0.8, 0.1, 0.2], [0, 0, 1, 1]) == 0.0

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(5, 200))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.standard_normal(n), 1)  # induce ties
            assert auc(scores, labels) == brute_force_auc(scores, labels)

    def test_single_class_rejected(self):
        with pytest.raises(InvalidInputError):
            auc([0.1, 0.2], [1, 1])


class TestAbPipeline:
    def test_single_experiment_identity_direction(self):
        x_a = np.zeros((2, 2))
        x_b = np.array([[1.0, 0.0], [1.0, 0.0]])
        w = ab_learn_weights([(x_a, x_b)], lambda s: 0.5 * np.eye(2))
        assert np.allclose(w, [1.0, 0.0])

    def test_two_experiments_average(self):
        x_a = np.zeros((2, 2))
        x_b1 = np.array([[1.0, 0.0], [1.0, 0.0]])
        x_b2 = np.array([[0.0, 1.0], [0.0, 1.0]])
        w = ab_learn_weights(
            [(x_a, x_b1), (x_a, x_b2)], lambda s: 0.5 * np.eye(2)
        )
        assert np.allclose(w, [0.5, 0.5])

    def test_all_zero_directions_rejected(self):
        x = np.array([[0.5, -0.5], [-0.5, 0.5]])
        with pytest.warns(UserWarning):
            with pytest.raises(InvalidInputError):
                ab_learn_weights([(x, x.copy())], lambda s: np.eye(2))

    def test_zscore_identical_groups(self):
        x = np.array([[0.4], [0.6], [0.2]])
        assert ab_zscore(np.array([1.0]), x, x) == pytest.approx(0.0)

    def test_zscore_sign_flip(self):
        x_a = np.array([[-0.5], [0.5]])
        x_y = np.array([[0.5], [1.5]])
        z = ab_zscore(np.array([1.0]), x_a, x_y)
        assert ab_zscore(np.array([-1.0]), x_a, x_y) == pytest.approx(-z)

    def test_zscore_hand_case(self):
        # means 0 and 1, centered variances 0.5 each
        x_a = np.array([[-0.5], [0.5]])
        x_y = np.array([[0.5], [1.5]])
        assert ab_zscore(np.array([1.0]), x_a, x_y) == pytest.approx(1.0, abs=1e-12)

    def test_synthetic_experiment_runs_and_separates(self):
        out = ab_synthetic_experiment(40, None, features=6, k_train=10, k_test=30, seed=9)
        assert 0.0 <= out["auc"] <= 1.0
        assert out["auc"] > 0.6  # recognizable pairs should score higher
        again = ab_synthetic_experiment(40, None, features=6, k_train=10, k_test=30, seed=9)
        assert out["auc"] == again["auc"]


def brute_force_portfolio(sigma, step=1e-3):
    """Exhaustive simplex grid minimizer for 3-asset problems."""
    w1 = np.arange(0.0, 1.0 + step / 2, step)
    grid = []
    for a in w1:
        b = np.arange(0.0, 1.0 - a + step / 2, step)
        ws = np.column_stack([np.full_like(b, a), b, 1.0 - a - b])
        grid.append(ws)
    ws = np.vstack(grid)
    ws = ws[np.abs(ws.sum(axis=1) - 1.0) < 1e-9]
    vals = np.einsum("ij,jk,ik->i", ws, sigma, ws)
    return ws[np.argmin(vals)]


class TestSimplexProjection:
    def test_already_on_simplex(self):
        w = np.array([0.2, 0.3, 0.5])
        assert np.allclose(simplex_project(w), w)

    def test_output_feasible(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            out = simplex_project(rng.standard_normal(6))
            assert np.all(out >= 0.0)
            assert out.sum() == pytest.approx(1.0, abs=1e-12)


class TestMinVariancePortfolio:
    def test_identity_uniform(self):
        for p in (2, 5):
            assert np.allclose(min_variance_portfolio(np.eye(p)), np.full(p, 1 / p), atol=1e-9)

    def test_diag_1_4(self):
        w = min_variance_portfolio(np.diag([1.0, 4.0]))
        assert np.allclose(w, [0.8, 0.2], atol=1e-6)
        oracle = brute_force_portfolio(np.diag([1.0, 4.0, 1e6]))
        assert np.allclose(oracle[:2], [0.8, 0.2], atol=2e-3)

    def test_dominant_low_variance_asset(self):
        w = min_variance_portfolio(np.diag([0.01, 100.0, 100.0]))
        assert w[0] > 0.99

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = rng.standard_normal((3, 3))
            sigma = g @ g.T + 0.1 * np.eye(3)
            w = min_variance_portfolio(sigma)
            oracle = brute_force_portfolio(sigma)
            assert np.max(np.abs(w - oracle)) < 1e-2

    def test_beats_uniform_and_vertices(self):
        rng = np.random.default_rng(3)
        for p in (3, 6, 10):
            g = rng.standard_normal((p, p))
            sigma = g @ g.T + 0.05 * np.eye(p)
            w = min_variance_portfolio(sigma)
            obj = w @ sigma @ w
            uniform = np.full(p, 1 / p)
            assert obj <= uniform @ sigma @ uniform + 1e-10
            for i in range(p):
                assert obj <= sigma[i, i] + 1e-10

    def test_zero_matrix_uniform(self):
        assert np.allclose(min_variance_portfolio(np.zeros((3, 3))), np.full(3, 1 / 3))

    def test_rejects_indefinite(self):
        with pytest.raises(InvalidInputError):
            min_variance_portfolio(np.diag([1.0, -1.0]))


class TestPerformanceMetrics:
    def test_all_zero(self):
        out = performance_metrics(np.zeros(5))
        assert out["average_return"] == 0.0
        assert out["cumulative"] == 0.0
        assert out["sharpe"] == float("inf")

    def test_product_formula(self):
        out = performance_metrics([0.1, -0.1])
        assert out["cumulative"] == pytest.approx((1.1 * 0.9 - 1.0) * 100.0, abs=1e-12)

    def test_all_positive_sortino_flag(self):
        out = performance_metrics([0.01, 0.02, 0.03])
        assert out["sortino"] == float("inf")
        assert np.isfinite(out["sharpe"])

    def test_annualization(self):
        out = performance_metrics([0.01, 0.01, 0.01, 0.02])
        assert out["average_return"] == pytest.approx(12 * 0.0125 * 100)

    def test_needs_two(self):
        with pytest.raises(InvalidInputError):
            performance_metrics([0.1])


class TestRollingBacktest:
    def test_constant_returns(self):
        r = np.tile([0.01, 0.02, 0.005], (15, 1))
        report = rolling_backtest(r, 10, lambda x: sample_covariance(x, "centered"))
        assert np.allclose(report.monthly_returns, report.monthly_returns[0])
        c = report.monthly_returns[0]
        t = report.monthly_returns.size
        assert report.cumulative_return == pytest.approx(((1 + c) ** t - 1) * 100, rel=1e-12)

    def test_single_asset_passthrough(self):
        r = np.linspace(-0.02, 0.03, 12).reshape(-1, 1)
        report = rolling_backtest(r, 5, lambda x: sample_covariance(x, "uncentered"))
        assert np.allclose(report.weights_history, 1.0)
        assert np.allclose(report.monthly_returns, r[5:, 0])

    def test_weights_on_simplex(self):
        rng = Rng(21)
        sigma = make_ground_truth(4, rng)
        returns = 0.01 * sample_mvn(sigma, 80, Rng(22))
        report = rolling_backtest(returns, 60, lambda x: sample_covariance(x, "centered"))
        assert report.weights_history.shape == (20, 4)
        assert np.all(report.weights_history >= -1e-12)
        assert np.allclose(report.weights_history.sum(axis=1), 1.0, atol=1e-8)

    def test_window_bounds(self):
        with pytest.raises(InvalidInputError):
            rolling_backtest(np.ones((10, 2)), 10, lambda x: np.eye(2))
