import numpy as np
import pytest

from conftest import preset_task
from uicloss.classifier import LinearClassifier, angle_between
from uicloss.gaussmix import GaussianMixture, Task, sample
from uicloss.losses import LossSpec, margin_loss_value
from uicloss.train import (
    DivergenceError,
    NoBoundaryError,
    Population,
    TrainConfig,
    as_weighted,
    decision_boundary_2d,
    fit_linear,
    objective,
)

NEWTON = TrainConfig(optimizer="newton", tol=1e-10)


def small_data(seed=0, n=(60, 240)):
    t = Task(0.2, GaussianMixture.single([1.0, 1.0], [[1.0, 0.4], [0.4, 1.5]]), GaussianMixture.single([-0.5, 0.0], np.eye(2)))
    return sample(t, counts=n, seed=seed)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(lr=0.0), dict(epochs=0), dict(batch_size=0), dict(momentum=1.0),
                                    dict(optimizer="adam"), dict(init="random"), dict(init="explicit"), dict(link="probit")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_replace(self):
        assert TrainConfig().replace(lr=0.1).lr == 0.1


class TestObjective:
    @pytest.mark.parametrize("fam", ["ce", "focal", "alpha", "tbl", "erf"])
    def test_gradient_and_hessian(self, fam):
        data = as_weighted(small_data())
        spec = LossSpec(fam, gamma=2.0, alpha=0.6, cpen=0.5)
        theta = np.array([0.3, -0.2, 0.1])
        f, g, H = objective(theta, data, spec, order=2)
        h = 1e-6
        E = np.eye(3)
        fd = np.array([(objective(theta + h * e, data, spec) - objective(theta - h * e, data, spec)) / (2 * h) for e in E])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-9)
        fdH = np.array([(objective(theta + h * e, data, spec, order=1)[1] - objective(theta - h * e, data, spec, order=1)[1]) / (2 * h) for e in E])
        assert np.allclose(H, fdH, rtol=1e-5, atol=1e-8)
        clf = LinearClassifier.from_theta(theta)
        assert f == pytest.approx(np.mean(margin_loss_value(spec, 2 * data.y - 1, clf.margin(data.X))), rel=1e-14)

    def test_population_weights_include_prior(self, sec23):
        d = as_weighted(Population(sec23, method="quadrature", order=8))
        assert d.v[d.y == 1].sum() == pytest.approx(sec23.pi, rel=1e-12)
        assert d.v.sum() == pytest.approx(1.0, rel=1e-12)


class TestFit:
    def test_balanced_symmetric_1d(self):
        t = Task(0.5, GaussianMixture.single([1.0], [[1.0]]), GaussianMixture.single([-1.0], [[1.0]]))
        r = fit_linear(sample(t, n=20_000, seed=1), LossSpec("ce"), NEWTON)
        assert abs(r.classifier.b) < 0.05 and r.classifier.w[0] > 0
        assert r.converged and r.grad_norm_final <= 1e-10

    def test_population_symmetric_1d(self):
        t = Task(0.5, GaussianMixture.single([1.0], [[1.0]]), GaussianMixture.single([-1.0], [[1.0]]))
        r = fit_linear(Population(t, method="quadrature"), LossSpec("ce"), NEWTON)
        # the Bayes classifier of this task is linear: w = 2, b = 0
        assert r.classifier.w[0] == pytest.approx(2.0, rel=1e-8)
        assert abs(r.classifier.b) < 1e-10

    def test_deterministic(self):
        cfg = TrainConfig(epochs=5, batch_size=32, seed=3)
        a = fit_linear(small_data(), LossSpec("ce"), cfg)
        b = fit_linear(small_data(), LossSpec("ce"), cfg)
        assert np.array_equal(a.classifier.theta, b.classifier.theta)
        assert a.loss_trace == b.loss_trace
        c = fit_linear(small_data(), LossSpec("ce"), cfg.replace(seed=4))
        assert not np.array_equal(a.classifier.theta, c.classifier.theta)

    def test_full_batch_monotone(self):
        r = fit_linear(small_data(), LossSpec("ce"), TrainConfig(optimizer="gd", lr=0.05, momentum=0.0, epochs=100))
        assert np.all(np.diff(r.loss_trace[1:]) <= 1e-15)
        assert np.all(np.isfinite(r.loss_trace))

    def test_sgd_reaches_newton(self):
        data = small_data()
        ref = fit_linear(data, LossSpec("ce"), NEWTON).classifier
        r = fit_linear(data, LossSpec("ce"), TrainConfig(lr=0.05, epochs=300, batch_size=64)).classifier
        assert angle_between(r.w, ref.w) < 2.0

    def test_logit_adjusted_init(self):
        data = small_data()
        r = fit_linear(data, LossSpec("ce"), TrainConfig(init="logit_adjusted", epochs=1, lr=1e-12))
        assert r.classifier.b == pytest.approx(np.log(0.2 / 0.8), rel=1e-9)

    def test_logit_adjusted_equivalence(self):
        data = small_data()
        b0 = np.log(0.2) - np.log(0.8)
        sgd = TrainConfig(lr=0.05, epochs=50, batch_size=32, seed=2)
        ce = fit_linear(data, LossSpec("ce"), sgd.replace(init="logit_adjusted")).classifier
        la = fit_linear(data, LossSpec("ce"), sgd.replace(logit_offset=b0)).classifier
        assert angle_between(ce.w, la.w) < 1.0
        assert abs((ce.b - b0) - la.b) < 1e-2

    def test_explicit_init(self):
        data = small_data()
        ref = fit_linear(data, LossSpec("ce"), NEWTON).classifier
        r = fit_linear(data, LossSpec("ce"), NEWTON.replace(init="explicit", init_w=tuple(ref.w), init_b=ref.b))
        assert len(r.loss_trace) == 1
        with pytest.raises(ValueError):
            fit_linear(data, LossSpec("ce"), NEWTON.replace(init="explicit", init_w=(1.0,)))

    def test_divergence_guard(self):
        with pytest.raises(DivergenceError):
            fit_linear(small_data(), LossSpec("square"), TrainConfig(optimizer="gd", lr=50.0, momentum=0.9, link="linear", epochs=200))

    def test_weights_match_duplication(self):
        data = small_data()
        w = np.ones(len(data))
        w[0] = 3.0
        a = fit_linear(data, LossSpec("ce"), NEWTON, weights=w).classifier
        X = np.vstack([data.X, data.X[:1], data.X[:1]])
        y = np.r_[data.y, data.y[:1], data.y[:1]]
        b = fit_linear((X, y), LossSpec("ce"), NEWTON).classifier
        assert np.allclose(a.theta, b.theta, atol=1e-8)

    def test_population_vs_empirical(self):
        t = preset_task("sec23")
        t = Task(0.05, t.minority, t.majority)
        pop = fit_linear(Population(t, mc_n=1_000_000, seed=0), LossSpec("ce"), NEWTON).classifier
        emp = fit_linear(sample(t, n=1_000_000, seed=0), LossSpec("ce"), NEWTON).classifier
        assert angle_between(pop.w, emp.w) < 1.0

    def test_bare_task(self):
        t = Task(0.3, GaussianMixture.single([1.0], [[1.0]]), GaussianMixture.single([-1.0], [[1.0]]))
        r = fit_linear(t, LossSpec("ce"), NEWTON.replace(seed=1))
        assert r.classifier.w[0] > 0


class TestBoundary:
    def test_vertical(self):
        pts = decision_boundary_2d(LinearClassifier([1.0, 0.0], -2.0))
        assert np.allclose(pts[:, 0], 2.0)

    def test_diagonal(self):
        pts = decision_boundary_2d(LinearClassifier([1.0, 1.0], 0.0))
        assert np.allclose(pts[:, 1], -pts[:, 0])

    def test_residual(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            clf = LinearClassifier(rng.normal(size=2), rng.normal())
            pts = decision_boundary_2d(clf, n=11)
            assert np.max(np.abs(clf.margin(pts))) < 1e-9

    def test_zero_normal(self):
        with pytest.raises(NoBoundaryError):
            decision_boundary_2d(LinearClassifier([0.0, 0.0], 1.0))

    def test_wrong_dim(self):
        with pytest.raises(ValueError):
            decision_boundary_2d(LinearClassifier([1.0], 0.0))
