"""Gaussian-mixture class conditionals, posteriors, sampling and population risk."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, ndtr

from .classifier import LinearClassifier
from .losses import LossSpec, margin_loss_value
from .rng import substream

_LOG_2PI = np.log(2.0 * np.pi)


class DimensionError(ValueError):
    pass


class DegenerateCovarianceError(ValueError):
    pass


class EvaluationPointError(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None] if weights.size > 1 else means[None, :]
        covs = np.asarray(self.covariances, dtype=float)
        k, d = means.shape
        if covs.ndim == 2 and k == 1:
            covs = covs[None]
        if weights.shape != (k,) or covs.shape != (k, d, d):
            raise DimensionError(
                f"inconsistent shapes: weights {weights.shape}, means {means.shape}, covariances {covs.shape}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if not np.allclose(covs, np.swapaxes(covs, 1, 2), rtol=0, atol=1e-12):
            raise DegenerateCovarianceError("covariances must be symmetric")
        try:
            chol = np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise DegenerateCovarianceError("every covariance must be positive definite") from exc
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "covariances", _frozen(covs))
        object.__setattr__(self, "_chol", _frozen(chol))
        object.__setattr__(self, "_logdet", _frozen(2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)))

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls([1.0], mean[None, :], np.atleast_2d(cov)[None])

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    @property
    def total_covariance(self) -> np.ndarray:
        """Within-component plus between-component covariance."""
        within = np.einsum("k,kij->ij", self.weights, self.covariances)
        centered = self.means - self.mean
        between = centered.T @ (self.weights[:, None] * centered)
        return within + between

    def component_log_densities(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x) if self.dim > 1 or x.ndim > 1 else x.reshape(-1, 1)
        if X.shape[-1] != self.dim:
            raise DimensionError(f"expected points of dimension {self.dim}, got {X.shape[-1]}")
        out = np.empty((X.shape[0], self.n_components))
        for k in range(self.n_components):
            z = np.linalg.solve(self._chol[k], (X - self.means[k]).T)
            out[:, k] = -0.5 * (np.sum(z * z, axis=0) + self.dim * _LOG_2PI + self._logdet[k])
        return out

    def log_density(self, x) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logsumexp(self.component_log_densities(x) + logw, axis=1)

    def cdf_1d(self, x) -> np.ndarray:
        if self.dim != 1:
            raise DimensionError("cdf_1d requires a one-dimensional mixture")
        x = np.asarray(x, dtype=float)[..., None]
        sd = np.sqrt(self.covariances[:, 0, 0])
        return ndtr((x - self.means[:, 0]) / sd) @ self.weights

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chol[comp], z)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        return cls(d["weights"], d["means"], d["covariances"])


def density(mix: GaussianMixture, x) -> np.ndarray:
    return np.exp(mix.log_density(x))


@dataclass(frozen=True, eq=False)
class Task:
    """A classification task: prior pi of the minority class (label 1), P, Q and a loss."""

    pi: float
    minority: GaussianMixture
    majority: GaussianMixture
    loss: LossSpec | None = None

    def __post_init__(self):
        if not 0.0 < self.pi <= 0.5:
            raise ValueError(f"pi must lie in (0, 0.5], got {self.pi}")
        if self.minority.dim != self.majority.dim:
            raise DimensionError("minority and majority must share a dimension")

    @property
    def rho(self) -> float:
        return self.pi / (1.0 - self.pi)

    @property
    def dim(self) -> int:
        return self.minority.dim

    @classmethod
    def from_rho(cls, rho, minority, majority, loss=None) -> "Task":
        return cls(rho / (1.0 + rho), minority, majority, loss)


@dataclass(frozen=True)
class LabeledSample:
    x: np.ndarray
    y: int


class Samples(NamedTuple):
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def points(self):
        for x, y in zip(self.X, self.y):
            yield LabeledSample(x, int(y))

    @property
    def counts(self) -> tuple[int, int]:
        n1 = int(np.sum(self.y == 1))
        return n1, len(self.y) - n1


def log_odds(task: Task, x) -> np.ndarray:
    """log(eta / (1 - eta)) = log rho + log p(x) - log q(x)."""
    lp = task.minority.log_density(x)
    lq = task.majority.log_density(x)
    if np.any(np.isneginf(lp) & np.isneginf(lq)):
        raise EvaluationPointError("both class densities underflow at an evaluation point")
    return np.log(task.rho) + lp - lq


def posterior_eta(task: Task, x) -> np.ndarray:
    lp = np.log(task.pi) + task.minority.log_density(x)
    lq = np.log1p(-task.pi) + task.majority.log_density(x)
    if np.any(np.isneginf(lp) & np.isneginf(lq)):
        raise EvaluationPointError("both class densities underflow at an evaluation point")
    return np.exp(lp - np.logaddexp(lp, lq))


def sample(task: Task, n: int | None = None, seed: int = 0, counts: tuple[int, int] | None = None) -> Samples:
    """Draw labelled points.

    With ``counts=(n_minority, n_majority)`` the class sizes are exact; otherwise
    each of the ``n`` labels is Bernoulli(pi).  Minority and majority points come
    from separate substreams, so growing one class leaves the other unchanged.
    """
    if counts is None:
        if n is None or n < 1:
            raise ValueError("n must be >= 1")
        n1 = int(substream(seed, "labels").binomial(n, task.pi))
        counts = (n1, n - n1)
    n1, n0 = (int(c) for c in counts)
    if n1 < 0 or n0 < 0 or n1 + n0 < 1:
        raise ValueError("class counts must be non-negative with a positive total")
    X1 = task.minority.sample(substream(seed, "minority"), n1)
    X0 = task.majority.sample(substream(seed, "majority"), n0)
    X = np.vstack([X1, X0])
    y = np.concatenate([np.ones(n1, dtype=int), np.zeros(n0, dtype=int)])
    return Samples(X, y)


def quadrature_nodes(mix: GaussianMixture, order: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite nodes and weights integrating against ``mix``."""
    if mix.dim > 2:
        raise DimensionError("quadrature is only supported for d <= 2")
    z, wz = np.polynomial.hermite.hermgauss(order)
    if mix.dim == 1:
        Z, WZ = z[:, None], wz / np.sqrt(np.pi)
    else:
        Z = np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
        WZ = np.outer(wz, wz).ravel() / np.pi
    Z = Z * np.sqrt(2.0)
    nodes = [mix.means[k] + Z @ mix._chol[k].T for k in range(mix.n_components)]
    weights = [mix.weights[k] * WZ for k in range(mix.n_components)]
    return np.vstack(nodes), np.concatenate(weights)


class RiskEstimate(NamedTuple):
    value: float
    stderr: float


def population_risk(
    task: Task,
    clf: LinearClassifier,
    method: str = "quadrature",
    *,
    order: int = 64,
    n: int = 100_000,
    seed: int = 0,
    link: str = "logistic",
) -> RiskEstimate:
    """pi E_P ell(1, .) + (1 - pi) E_Q ell(0, .) for the classifier's margin.

    ``method="quadrature"`` uses tensor Gauss-Hermite rules (d <= 2, stderr 0);
    ``method="mc"`` draws ``n`` points from each class.
    """
    spec = task.loss
    if spec is None:
        raise ValueError("task has no loss")
    if method == "quadrature":
        Xp, Wp = quadrature_nodes(task.minority, order)
        Xq, Wq = quadrature_nodes(task.majority, order)
        rp = Wp @ margin_loss_value(spec, 1, clf.margin(Xp), link)
        rq = Wq @ margin_loss_value(spec, -1, clf.margin(Xq), link)
        return RiskEstimate(float(task.pi * rp + (1 - task.pi) * rq), 0.0)
    if method == "mc":
        Xp = task.minority.sample(substream(seed, "risk", "minority"), n)
        Xq = task.majority.sample(substream(seed, "risk", "majority"), n)
        lp = margin_loss_value(spec, 1, clf.margin(Xp), link)
        lq = margin_loss_value(spec, -1, clf.margin(Xq), link)
        value = task.pi * lp.mean() + (1 - task.pi) * lq.mean()
        var = task.pi**2 * lp.var(ddof=1) / n + (1 - task.pi) ** 2 * lq.var(ddof=1) / n
        return RiskEstimate(float(value), float(np.sqrt(var)))
    raise ValueError(f"unknown method {method!r}")


def population_auc(minority: GaussianMixture, majority: GaussianMixture, w) -> float:
    """P(w @ x+ > w @ x-) for independent draws from the two mixtures."""
    w = np.asarray(w, dtype=float)
    dmu = (minority.means @ w)[:, None] - (majority.means @ w)[None, :]
    vp = np.einsum("i,kij,j->k", w, minority.covariances, w)
    vq = np.einsum("i,kij,j->k", w, majority.covariances, w)
    sd = np.sqrt(vp[:, None] + vq[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, dmu / sd, 0.0)
    return float(minority.weights @ ndtr(z) @ majority.weights)
