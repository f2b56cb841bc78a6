import dataclasses
import math

import numpy as np
import pytest

from covshrink import (
    DivergenceKind,
    DomainError,
    InvalidInputError,
    Rng,
    SingularMatrixError,
    combined_loss,
    condition_number,
    estimate_record,
    frobenius_loss,
    frobenius_norm,
    invert_spd,
    kkt_residual,
    lw_linear,
    make_ground_truth,
    random_orthogonal,
    relative_eig_error,
    rho_max,
    sample_covariance,
    sample_mvn,
    shrink,
    stein_loss,
    tau_star,
)

ALL = list(DivergenceKind)
KL = DivergenceKind.KULLBACK_LEIBLER
W = DivergenceKind.WASSERSTEIN
SS = DivergenceKind.SYMMETRIZED_STEIN
SQF = DivergenceKind.SQUARED_FROBENIUS
WF = DivergenceKind.WEIGHTED_FROBENIUS


def random_nominal(seed, p=5, base=0.05):
    rng = Rng(seed)
    g = rng.normals(p * p).reshape(p, p)
    return g @ g.T / p + base * np.eye(p)


class TestShrink:
    def test_unbinding_gives_scaled_identity(self):
        nominal = np.diag([0.5, 2.0])
        tau = 1.0
        est = shrink(nominal, KL, tau, rho_max(KL, tau, [0.5, 2.0]))
        assert np.array_equal(est.sigma_star, np.eye(2))
        assert np.array_equal(est.x_star, np.eye(2))
        assert not est.binding

    def test_tiny_rho_recovers_nominal(self):
        nominal = random_nominal(1)
        for kind in ALL:
            lam = np.linalg.eigvalsh(nominal)
            rho = 1e-10 * rho_max(kind, 1.0, lam)
            est = shrink(nominal, kind, 1.0, rho)
            assert frobenius_norm(est.sigma_star - nominal) < 1e-3 * frobenius_norm(nominal)

    @pytest.mark.parametrize("kind", ALL)
    def test_inverse_pair_consistency(self, kind):
        nominal = random_nominal(2)
        p = nominal.shape[0]
        tau = tau_star(nominal)
        lam = np.linalg.eigvalsh(nominal)
        est = shrink(nominal, kind, tau, 0.4 * rho_max(kind, tau, lam))
        assert frobenius_norm(est.sigma_star @ est.x_star - np.eye(p)) < 1e-7 * p
        assert frobenius_norm(est.x_star - invert_spd(est.sigma_star)) < 1e-9
        spectral = (est.basis * (1.0 / est.shrunk_spectrum)) @ est.basis.T
        assert frobenius_norm(est.x_star - spectral) < 1e-9

    def test_rotation_equivariance(self):
        nominal = random_nominal(3)
        for i, kind in enumerate(ALL):
            r = random_orthogonal(5, Rng(50 + i))
            tau = tau_star(nominal)
            rho = 0.3 * rho_max(kind, tau, np.linalg.eigvalsh(nominal))
            direct = shrink(r @ nominal @ r.T, kind, tau, rho).sigma_star
            conjugated = r @ shrink(nominal, kind, tau, rho).sigma_star @ r.T
            assert frobenius_norm(direct - conjugated) < 1e-7 * frobenius_norm(nominal)

    @pytest.mark.parametrize("kind", ALL)
    def test_condition_improves_and_decreases_in_rho(self, kind):
        nominal = random_nominal(4)
        tau = tau_star(nominal)
        rmx = rho_max(kind, tau, np.linalg.eigvalsh(nominal))
        conds = []
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
            est = shrink(nominal, kind, tau, frac * rmx)
            assert est.condition_after <= est.condition_before
            conds.append(est.condition_after)
        assert all(c1 > c2 for c1, c2 in zip(conds, conds[1:]))
        assert conds[-1] == pytest.approx(1.0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(InvalidInputError):
            shrink(np.eye(2), KL, 0.0, 0.1)
        with pytest.raises(InvalidInputError):
            shrink(np.eye(2), KL, 1.0, 0.0)

    def test_singular_nominal_domain_errors(self):
        singular = np.diag([1.0, 0.0])
        for kind in (KL, SS, WF):
            with pytest.raises(DomainError):
                shrink(singular, kind, 1.0, 0.1)

    def test_singular_nominal_psd_kinds_give_pd(self):
        rng = Rng(7)
        x = sample_mvn(make_ground_truth(6, rng), 3, Rng(8))
        s_hat = sample_covariance(x, "uncentered")
        with pytest.raises(SingularMatrixError):
            invert_spd(s_hat)
        for kind in (W, SQF):
            est = shrink(s_hat, kind, tau_star(s_hat), 0.5)
            assert np.linalg.eigvalsh(est.sigma_star)[0] > 0.0
            loss = combined_loss(est.sigma_star, np.eye(6), 1.0)
            assert math.isfinite(loss)
            assert est.condition_before == math.inf
            assert est.condition_after < math.inf

    def test_record_fields(self):
        est = shrink(np.diag([0.5, 2.0]), KL, 1.0, 0.125)
        rec = estimate_record(est)
        expected = {"p", "kind", "tau", "rho", "rho_max", "gamma_star", "binding",
                    "eigenvalues_nominal", "eigenvalues_shrunk", "sigma_star",
                    "x_star", "condition_before", "condition_after"}
        assert expected <= set(rec)
        assert rec["p"] == 2 and len(rec["sigma_star"]) == 4


class TestLosses:
    def test_stein_identity(self):
        assert stein_loss(np.eye(2), np.eye(2)) == pytest.approx(2.0)

    def test_stein_at_inverse(self):
        s = np.diag([2.0, 2.0])
        x = np.diag([0.5, 0.5])
        assert stein_loss(x, s) == pytest.approx(-np.log(0.25) + 2.0, abs=1e-12)

    def test_stein_minimized_at_inverse(self):
        rng = np.random.default_rng(0)
        s = np.diag([1.0, 3.0])
        x_opt = invert_spd(s)
        base = stein_loss(x_opt, s)
        for _ in range(20):
            d = rng.standard_normal((2, 2))
            pert = x_opt + 1e-3 * 0.5 * (d + d.T)
            if np.linalg.eigvalsh(pert)[0] > 0:
                assert stein_loss(pert, s) >= base - 1e-12

    def test_stein_rejects_indefinite(self):
        with pytest.raises(SingularMatrixError):
            stein_loss(np.diag([1.0, -1.0]), np.eye(2))

    def test_frobenius_values(self):
        assert frobenius_loss(np.eye(2), np.eye(2)) == pytest.approx(-2.0)
        assert frobenius_loss(np.zeros((2, 2)), np.eye(2)) == pytest.approx(0.0)

    def test_frobenius_minimized_at_s(self):
        s = np.diag([1.0, 3.0])
        base = frobenius_loss(s, s)
        for diag in ([0.9, 3.0], [1.1, 3.0], [1.0, 2.5], [1.0, 3.5]):
            assert frobenius_loss(np.diag(diag), s) > base

    def test_combined_identity(self):
        for p in (2, 4):
            assert combined_loss(np.eye(p), np.eye(p), 1.0) == pytest.approx(p / 2)

    def test_combined_scalar_case(self):
        got = combined_loss(np.array([[2.0]]), np.array([[1.0]]), 1.0)
        assert got == pytest.approx(np.log(2.0) + 0.5, abs=1e-12)

    def test_combined_decomposition(self):
        rng = Rng(10)
        sigma = random_nominal(11)
        sigma0 = make_ground_truth(5, rng)
        tau = 0.7
        direct = combined_loss(sigma, sigma0, tau)
        split = stein_loss(invert_spd(sigma), sigma0) + 0.5 * tau * frobenius_loss(sigma, sigma0)
        assert direct == pytest.approx(split, rel=1e-10)

    def test_combined_infinite_iff_not_pd(self):
        with pytest.raises(SingularMatrixError):
            combined_loss(np.diag([1.0, 0.0]), np.eye(2), 1.0)


class TestRelativeEigError:
    def test_zero_at_truth(self):
        sigma0 = np.diag([1.0, 2.0])
        assert relative_eig_error(sigma0, sigma0) == pytest.approx(0.0)

    def test_double_is_one(self):
        sigma0 = np.diag([1.0, 2.0, 5.0])
        assert relative_eig_error(2.0 * sigma0, sigma0) == pytest.approx(1.0)

    def test_hand_case(self):
        got = relative_eig_error(np.diag([2.0, 1.0]), np.diag([4.0, 1.0]))
        assert got == pytest.approx(0.5 * (2.0 / 4.0 + 0.0))

    def test_rejects_singular_reference(self):
        with pytest.raises(SingularMatrixError):
            relative_eig_error(np.eye(2), np.diag([1.0, 0.0]))


class TestKktResidual:
    def test_unbinding_branch_residual_zero(self):
        est = shrink(np.diag([0.5, 2.0]), KL, 1.0, 1.0)
        assert kkt_residual(est) <= 1e-12 * (1 + est.tau * est.shrunk_spectrum.max())

    @pytest.mark.parametrize("kind", ALL)
    def test_binding_solutions_certified(self, kind):
        nominal = random_nominal(12)
        tau = tau_star(nominal)
        rho = 0.25 * rho_max(kind, tau, np.linalg.eigvalsh(nominal))
        est = shrink(nominal, kind, tau, rho)
        assert kkt_residual(est, nominal) <= 1e-8 * (1 + tau * est.shrunk_spectrum.max())

    def test_perturbation_detected(self):
        est = shrink(np.diag([0.5, 2.0]), KL, 1.0, 0.125)
        tampered = dataclasses.replace(
            est, shrunk_spectrum=est.shrunk_spectrum + np.array([1e-3, 0.0])
        )
        assert kkt_residual(tampered) > 1e-4


class TestLwLinear:
    def test_zero_samples_degenerate(self):
        out = lw_linear(np.zeros((4, 3)))
        assert np.array_equal(out, np.zeros((3, 3)))

    def test_consistency_large_n(self):
        x = sample_mvn(np.eye(3), 50000, Rng(13))
        assert np.max(np.abs(lw_linear(x) - np.eye(3))) < 0.05

    def test_eigenvalues_between_sample_and_target(self):
        x = sample_mvn(make_ground_truth(4, Rng(14)), 30, Rng(15))
        s = sample_covariance(x, "uncentered")
        nu = np.trace(s) / 4
        lam_s = np.linalg.eigvalsh(s)
        lam_o = np.linalg.eigvalsh(lw_linear(x))
        lo = np.minimum(lam_s, nu) - 1e-10
        hi = np.maximum(lam_s, nu) + 1e-10
        assert np.all(lam_o >= lo) and np.all(lam_o <= hi)

    def test_needs_two_rows(self):
        with pytest.raises(InvalidInputError):
            lw_linear(np.ones((1, 3)))

    def test_shrinks_toward_scalar(self):
        # few samples, strong dispersion: intensity strictly inside (0, 1)
        x = sample_mvn(make_ground_truth(5, Rng(16)), 8, Rng(17))
        s = sample_covariance(x, "uncentered")
        out = lw_linear(x)
        assert condition_number(out) < condition_number(s + 1e-9 * np.eye(5))
