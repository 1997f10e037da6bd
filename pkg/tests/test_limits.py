import numpy as np
import pytest

from conftest import random_mixture
from uicloss.classifier import LinearClassifier, angle_between
from uicloss.gaussmix import GaussianMixture, Task
from uicloss.limits import (
    SingularMatrixError,
    limit_alpha,
    limit_erf,
    limit_square,
    optimal_auc_direction,
    two_gaussian_auc,
)
from uicloss.losses import LossSpec
from uicloss.train import Population, TrainConfig, fit_linear

SINGLE_P = GaussianMixture.single([2.5, 1.5], np.eye(2))
SINGLE_Q = GaussianMixture.single([0.0, 0.0], [[1.0, 0.3], [0.3, 0.8]])
ASYM_Q = GaussianMixture([0.6, 0.4], [[0.0, 1.0], [1.0, -1.0]], [[[1.0, 0.2], [0.2, 1.0]], [[0.5, 0.0], [0.0, 1.5]]])
NEWTON = TrainConfig(optimizer="newton", tol=1e-12, max_iter=100)


def random_task(rng, rho=1e-4):
    return Task.from_rho(rho, random_mixture(rng, rng.integers(1, 4)), random_mixture(rng, rng.integers(1, 4)))


class TestSquare:
    def test_single_cluster(self):
        t = Task.from_rho(1e-3, SINGLE_P, SINGLE_Q)
        r = limit_square(t)
        assert np.allclose(r.classifier.w, 2e-3 * np.linalg.solve(SINGLE_Q.covariances[0], SINGLE_P.means[0]))
        assert r.classifier.b == -1.0 and r.converged

    def test_matches_trained_square_loss(self):
        t = Task.from_rho(1e-5, SINGLE_P, ASYM_Q)
        fit = fit_linear(Population(t, method="quadrature", order=32), LossSpec("square"), NEWTON.replace(link="linear"))
        lim = limit_square(t).classifier
        assert np.allclose(fit.classifier.w / lim.w, 1.0, atol=2e-3)
        assert abs(fit.classifier.b + 1) < 1e-3


class TestSquareExamples:
    def test_hand_value(self):
        t = Task.from_rho(1e-4, GaussianMixture.single([4.0, 0.0], np.eye(2)), GaussianMixture.single([0.0, 0.0], np.eye(2)))
        r = limit_square(t).classifier
        assert np.allclose(r.w, [8e-4, 0.0], rtol=1e-12) and r.b == -1.0

    def test_no_signal(self):
        assert np.all(limit_square(Task.from_rho(1e-4, SINGLE_Q, SINGLE_Q)).classifier.w == 0)

    def test_linear_in_rho(self):
        a = limit_square(Task.from_rho(1e-5, SINGLE_P, ASYM_Q)).classifier
        b = limit_square(Task.from_rho(1e-4, SINGLE_P, ASYM_Q)).classifier
        assert np.allclose(b.w, 10 * a.w, rtol=1e-12) and a.b == b.b


class TestAlpha:
    def test_single_cluster_general_alpha(self):
        t = Task.from_rho(1e-4, SINGLE_P, SINGLE_Q)
        for a in (0.3, 0.7):
            w = limit_alpha(t, a).classifier.w
            ref = np.linalg.solve(a * SINGLE_Q.covariances[0] + (1 - a) * SINGLE_P.covariances[0], SINGLE_P.means[0] - SINGLE_Q.means[0])
            assert angle_between(w, ref) < 1e-6

    def test_mirrored_majority(self):
        # the whole task is symmetric about the x1 axis
        minority = GaussianMixture.single([-2.0, 0.0], np.eye(2))
        majority = GaussianMixture([0.5, 0.5], [[2.0, 2.0], [2.0, -2.0]], [np.eye(2), np.eye(2)])
        r = limit_alpha(Task.from_rho(1e-4, minority, majority), 0.6)
        assert np.allclose(r.weights.xi_minus, 0.5, atol=1e-10)

    def test_no_signal(self):
        r = limit_alpha(Task.from_rho(1e-4, SINGLE_Q, SINGLE_Q), 0.5)
        assert r.converged and np.allclose(r.classifier.w, 0.0)

    def test_tilt_monotone_in_alpha(self, sec23):
        t = Task.from_rho(1e-4, sec23.minority, sec23.majority)
        tilt = [np.degrees(np.arctan2(abs(limit_alpha(t, a).classifier.w[1]), abs(limit_alpha(t, a).classifier.w[0]))) for a in (0.9, 0.7, 0.5)]
        assert tilt[0] < tilt[1] < tilt[2]
        for a in (0.9, 0.7, 0.5):
            fit = fit_linear(Population(t, method="quadrature", order=48), LossSpec("alpha", alpha=a), NEWTON)
            assert angle_between(fit.classifier.w, limit_alpha(t, a).classifier.w) < 2.0

    def test_trained_bias_slope_is_alpha(self):
        bs = []
        for rho in (1e-3, 1e-5, 1e-7):
            t = Task.from_rho(rho, SINGLE_P, ASYM_Q)
            bs.append(fit_linear(Population(t, method="quadrature", order=48), LossSpec("alpha", alpha=0.7), NEWTON).classifier.b)
        slopes = np.diff(bs) / np.log(1e-2)
        assert np.allclose(slopes, 0.7, atol=5e-3)

    @pytest.mark.xfail(strict=True, reason="trained b / log rho is 0.95 here with slope alpha, far from 1 / alpha (1.43)")
    def test_trained_bias_literal_inverse_alpha(self):
        t = Task.from_rho(1e-5, SINGLE_P, ASYM_Q)
        fit = fit_linear(Population(t, method="quadrature", order=48), LossSpec("alpha", alpha=0.7), NEWTON)
        assert fit.classifier.b / np.log(1e-5) == pytest.approx(1 / 0.7, rel=0.1)

    def test_training_angle_shrinks_with_rho(self):
        angles = []
        for rho in (1e-3, 1e-4, 1e-5):
            t = Task.from_rho(rho, SINGLE_P, ASYM_Q)
            fit = fit_linear(Population(t, method="quadrature", order=48), LossSpec("alpha", alpha=0.7), NEWTON)
            angles.append(angle_between(fit.classifier.w, limit_alpha(t, 0.7).classifier.w))
        assert angles[0] > angles[1] > angles[2] and angles[2] < 2.0

    @pytest.mark.xfail(strict=True, reason="on the four-cluster preset at alpha=0.9 the trained direction crosses the limit and the gap peaks near rho=1e-5")
    def test_training_angle_shrinks_with_rho_preset(self, sec23):
        angles = []
        for rho in (1e-3, 1e-4, 1e-5):
            t = Task.from_rho(rho, sec23.minority, sec23.majority)
            fit = fit_linear(Population(t, method="quadrature", order=48), LossSpec("alpha", alpha=0.9), NEWTON)
            angles.append(angle_between(fit.classifier.w, limit_alpha(t, 0.9).classifier.w))
        assert angles[0] > angles[1] > angles[2]

    def test_single_cluster_direction(self):
        t = Task.from_rho(1e-4, SINGLE_P, SINGLE_Q)
        r = limit_alpha(t, 0.5)
        ref, _ = optimal_auc_direction(SINGLE_P, SINGLE_Q)
        assert r.converged
        assert angle_between(r.classifier.w, ref) < 1e-6

    @pytest.mark.parametrize("seed", range(10))
    def test_solvers_agree(self, seed):
        rng = np.random.default_rng(seed)
        t = random_task(rng)
        alpha = rng.uniform(0.3, 0.9)
        a = limit_alpha(t, alpha, method="fixed_point")
        b = limit_alpha(t, alpha, method="mirror")
        assert a.converged and b.converged
        assert np.max(np.abs(a.classifier.w - b.classifier.w)) < 1e-6
        assert np.max(np.abs(a.weights.xi_minus - b.weights.xi_minus)) < 1e-6

    def test_weights_on_simplex(self, sec23):
        r = limit_alpha(sec23, 0.6)
        for xi in (r.weights.xi_minus, r.weights.xi_plus):
            assert np.all(xi >= 0) and abs(xi.sum() - 1) < 1e-10
        assert r.residual < 1e-10

    def test_strong_duality(self, sec23):
        from uicloss.limits import _Program, _group

        r = limit_alpha(sec23, 0.4)
        assert r.extras["G"] == pytest.approx(-r.extras["H"], rel=1e-8)
        # the dual value is minimal on the simplex
        prog = _Program([_group(0.6, 1.0, sec23.majority), _group(0.4, -1.5, sec23.minority)])
        xis = [r.weights.xi_minus, r.weights.xi_plus]
        h0 = prog.dual(xis)[0]
        for d in (0.01, -0.01):
            bumped = [np.array([xis[0][0] + d, xis[0][1] - d]), xis[1]]
            assert prog.dual(bumped)[0] > h0

    def test_bias_scales_with_log_rho(self, sec23):
        b = [limit_alpha(Task.from_rho(rho, sec23.minority, sec23.majority), 0.7).classifier.b for rho in (1e-10, 1e-20)]
        assert (b[1] - b[0]) / np.log(1e-10) == pytest.approx(0.7, rel=1e-9)

    def test_alpha_range(self, sec23):
        with pytest.raises(ValueError):
            limit_alpha(sec23, 1.0)
        with pytest.raises(ValueError):
            limit_alpha(sec23, 0.5, method="newton")


class TestErf:
    def test_solvers_agree(self, sec23):
        a, b = limit_erf(sec23), limit_erf(sec23, method="mirror")
        assert a.converged and b.converged
        assert np.allclose(a.classifier.w, b.classifier.w, atol=1e-8)

    def test_single_cluster(self):
        # one majority component: v = Sigma_-^-1 (mu_+ - mu_-)
        t = Task.from_rho(1e-6, SINGLE_P, SINGLE_Q)
        r = limit_erf(t)
        v = np.linalg.solve(SINGLE_Q.covariances[0], SINGLE_P.means[0] - SINGLE_Q.means[0])
        s = np.sqrt(-2 * np.log(t.rho))
        assert np.allclose(r.classifier.w, v / s)
        assert r.classifier.b == pytest.approx(-s)

    def test_bias_value(self):
        r = limit_erf(Task.from_rho(1e-4, SINGLE_P, SINGLE_Q))
        assert abs(r.classifier.b) == pytest.approx(np.sqrt(-2 * np.log(1e-4)), rel=1e-12)
        assert abs(r.classifier.b) == pytest.approx(4.2919, abs=1e-4)

    def test_covariance_scaling(self):
        t1 = Task.from_rho(1e-4, SINGLE_P, SINGLE_Q)
        scaled = GaussianMixture.single(SINGLE_Q.means[0], 3.0 * SINGLE_Q.covariances[0])
        t3 = Task.from_rho(1e-4, SINGLE_P, scaled)
        assert np.allclose(limit_erf(t3).classifier.w, limit_erf(t1).classifier.w / 3.0, rtol=1e-12)

    def test_no_signal(self):
        r = limit_erf(Task.from_rho(1e-4, SINGLE_Q, SINGLE_Q))
        assert r.converged and np.allclose(r.classifier.w, 0.0)

    def test_direction_matches_training(self, sec23):
        t = Task.from_rho(1e-6, sec23.minority, sec23.majority)
        fit = fit_linear(Population(t, method="quadrature", order=48), LossSpec("erf"), NEWTON)
        assert angle_between(fit.classifier.w, limit_erf(t).classifier.w) < 2.0


class TestAuc:
    def test_formula_vs_sampling(self):
        rng = np.random.default_rng(5)
        for _ in range(3):
            p, q = random_mixture(rng, 1), random_mixture(rng, 1)
            w = rng.normal(size=2)
            xp = p.sample(rng, 100_000) @ w
            xq = q.sample(rng, 100_000) @ w
            emp = np.mean(xp > xq)
            ref = two_gaussian_auc(w, p.means[0], p.covariances[0], q.means[0], q.covariances[0])
            assert abs(emp - ref) < 0.005

    def test_optimal_beats_random(self):
        w, best = optimal_auc_direction(SINGLE_P, SINGLE_Q)
        dirs = np.random.default_rng(0).normal(size=(1000, 2))
        aucs = [two_gaussian_auc(d, SINGLE_P.means[0], SINGLE_P.covariances[0], SINGLE_Q.means[0], SINGLE_Q.covariances[0]) for d in dirs]
        assert best >= max(aucs)

    def test_identity_example(self):
        w, value = optimal_auc_direction(GaussianMixture.single([2.0, 0.0], np.eye(2)), GaussianMixture.single([0.0, 0.0], np.eye(2)))
        assert angle_between(w, [1.0, 0.0]) < 1e-12
        # w'dmu / sqrt(w'(S+ + S-)w) = 2 / sqrt(2)
        assert value == pytest.approx(0.9213503964748574, rel=1e-12)

    def test_equal_means(self):
        assert optimal_auc_direction(SINGLE_Q, SINGLE_Q)[1] == 0.5

    def test_zero_direction(self):
        assert two_gaussian_auc(np.zeros(2), [1, 0], np.eye(2), [0, 0], np.eye(2)) == 0.5

    def test_needs_single_gaussians(self, sec23):
        with pytest.raises(ValueError):
            optimal_auc_direction(sec23.minority, sec23.majority)


def test_classifier_helpers():
    clf = LinearClassifier([1.0, -1.0], 0.5)
    assert np.array_equal(LinearClassifier.from_theta(clf.theta).w, clf.w)
    assert np.array_equal(clf.predict(np.array([[0.0, 0.0], [0.0, 2.0]])), [1, 0])
    assert angle_between([1, 0], [0, 2]) == pytest.approx(90.0)
    assert angle_between([1, 1], [2, 2]) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError):
        LinearClassifier([np.nan, 0.0], 0.0)


def test_singular_error_is_linalg_error():
    assert issubclass(SingularMatrixError, np.linalg.LinAlgError)
