"""Linear classifiers fitted by gradient methods under any loss.

Every objective is reduced to a weighted point set, sum_i v_i ell(y_i, m_i)
with m_i = w @ x_i + b + offset.  Empirical data carry v_i = 1/n (times an
optional per-row weight); population objectives carry stratified Monte Carlo
or Gauss-Hermite weights that already include the class priors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import LinearClassifier
from .gaussmix import Samples, Task, quadrature_nodes
from .losses import LossSpec, margin_loss_derivs
from .rng import substream

DIVERGENCE_LIMIT = 1e10


class DivergenceError(RuntimeError):
    pass


class NoBoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    ``optimizer`` is ``"sgd"`` (minibatch, heavy-ball momentum), ``"gd"``
    (full batch, same momentum) or ``"newton"`` (damped Newton to
    ``grad_norm <= tol``).  ``init`` is ``"zeros"``, ``"logit_adjusted"``
    (b0 = log of the minority odds) or ``"explicit"`` (``init_w``, ``init_b``).
    ``logit_offset`` is added to every margin inside the loss, which turns
    cross entropy into the logit-adjusted loss.
    """

    optimizer: str = "sgd"
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 200
    batch_size: int = 256
    seed: int = 0
    init: str = "zeros"
    init_w: tuple | None = None
    init_b: float = 0.0
    link: str = "logistic"
    logit_offset: float = 0.0
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.optimizer not in ("sgd", "gd", "newton"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("zeros", "logit_adjusted", "explicit"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.link not in ("logistic", "linear"):
            raise ValueError(f"unknown link {self.link!r}")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.max_iter < 1:
            raise ValueError("epochs, batch_size and max_iter must be >= 1")
        if self.init == "explicit" and self.init_w is None:
            raise ValueError("explicit init needs init_w")

    def replace(self, **kw) -> "TrainConfig":
        return TrainConfig(**{**self.__dict__, **kw})


@dataclass(frozen=True)
class Population:
    """Population objective of a task, discretized by stratified MC or quadrature."""

    task: Task
    mc_n: int = 100_000
    method: str = "mc"
    order: int = 64
    seed: int = 0


@dataclass(frozen=True)
class WeightedData:
    X: np.ndarray
    y: np.ndarray  # labels in {0, 1}
    v: np.ndarray  # objective weights
    prior: float  # minority share used by the logit-adjusted init

    @property
    def ypm(self) -> np.ndarray:
        return 2 * self.y - 1


def as_weighted(data, weights=None) -> WeightedData:
    if isinstance(data, WeightedData):
        return data
    if isinstance(data, Population):
        task = data.task
        if data.method == "quadrature":
            Xp, Wp = quadrature_nodes(task.minority, data.order)
            Xq, Wq = quadrature_nodes(task.majority, data.order)
            Wp, Wq = task.pi * Wp, (1.0 - task.pi) * Wq
        elif data.method == "mc":
            Xp = task.minority.sample(substream(data.seed, "population", "minority"), data.mc_n)
            Xq = task.majority.sample(substream(data.seed, "population", "majority"), data.mc_n)
            Wp = np.full(data.mc_n, task.pi / data.mc_n)
            Wq = np.full(data.mc_n, (1.0 - task.pi) / data.mc_n)
        else:
            raise ValueError(f"unknown population method {data.method!r}")
        X = np.vstack([Xp, Xq])
        y = np.concatenate([np.ones(len(Xp), int), np.zeros(len(Xq), int)])
        return WeightedData(X, y, np.concatenate([Wp, Wq]), task.pi)
    X, y = (data.X, data.y) if isinstance(data, Samples) else data
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int)
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X and y must have the same non-zero length")
    n = X.shape[0]
    v = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, float) / n
    return WeightedData(X, y, v, float(np.mean(y == 1)))


def objective(theta, data: WeightedData, spec: LossSpec, link="logistic", offset=0.0, order=0):
    """Objective value and, for ``order`` >= 1 and 2, its gradient and Hessian in theta = (w, b)."""
    m = data.X @ theta[:-1] + theta[-1] + offset
    val, d1, d2 = margin_loss_derivs(spec, data.ypm, m, link)
    out = [float(data.v @ val)]
    if order >= 1:
        g = data.v * d1
        out.append(np.append(g @ data.X, g.sum()))
    if order >= 2:
        Xt = np.hstack([data.X, np.ones((data.X.shape[0], 1))])
        out.append(Xt.T @ (Xt * (data.v * d2)[:, None]))
    return out[0] if order == 0 else tuple(out)


@dataclass
class TrainResult:
    classifier: LinearClassifier
    loss_trace: list = field(default_factory=list)
    grad_norm_final: float = np.nan
    converged: bool = False


def _guard(value, it):
    if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
        raise DivergenceError(f"objective reached {value!r} at iteration {it}; lower the learning rate")


def _initial_theta(d, data: WeightedData, cfg: TrainConfig):
    if cfg.init == "zeros":
        return np.zeros(d + 1)
    if cfg.init == "logit_adjusted":
        p = data.prior
        if not 0 < p < 1:
            raise ValueError("logit-adjusted init needs both classes present")
        return np.append(np.zeros(d), np.log(p) - np.log1p(-p))
    w = np.asarray(cfg.init_w, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"init_w must have length {d}")
    return np.append(w, cfg.init_b)


def _newton(theta, data, spec, cfg):
    trace = []
    gnorm = np.inf
    for it in range(cfg.max_iter):
        f, g, H = objective(theta, data, spec, cfg.link, cfg.logit_offset, order=2)
        _guard(f, it)
        trace.append(f)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.tol:
            return theta, trace, gnorm, True
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        if not g @ step > 0:  # not a descent direction; fall back to the gradient
            step = g
        t = 1.0
        while t > 1e-12:
            f_new = objective(theta - t * step, data, spec, cfg.link, cfg.logit_offset)
            if f_new <= f - 1e-4 * t * (g @ step) or abs(f_new - f) <= 1e-15 * abs(f):
                break
            t *= 0.5
        theta = theta - t * step
    f, g = objective(theta, data, spec, cfg.link, cfg.logit_offset, order=1)
    trace.append(f)
    gnorm = float(np.linalg.norm(g))
    return theta, trace, gnorm, gnorm <= cfg.tol


def _momentum(theta, data, spec, cfg):
    n = data.X.shape[0]
    full = cfg.optimizer == "gd" or cfg.batch_size >= n
    vel = np.zeros_like(theta)
    trace = []
    for epoch in range(cfg.epochs):
        if full:
            batches = [None]
        else:
            perm = substream(cfg.seed, "train", "epoch", epoch).permutation(n)
            batches = [perm[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        for idx in batches:
            if idx is None:
                part = data
            else:
                # rescale so the minibatch gradient is unbiased for the full objective
                part = WeightedData(data.X[idx], data.y[idx], data.v[idx] * (n / len(idx)), data.prior)
            _, g = objective(theta, part, spec, cfg.link, cfg.logit_offset, order=1)
            vel = cfg.momentum * vel - cfg.lr * g
            theta = theta + vel
        f = objective(theta, data, spec, cfg.link, cfg.logit_offset)
        _guard(f, epoch)
        trace.append(f)
    _, g = objective(theta, data, spec, cfg.link, cfg.logit_offset, order=1)
    gnorm = float(np.linalg.norm(g))
    return theta, trace, gnorm, gnorm <= cfg.tol


def fit_linear(data_or_task, spec: LossSpec, cfg: TrainConfig = TrainConfig(), weights=None) -> TrainResult:
    """Fit (w, b) minimizing the weighted mean margin loss.

    ``data_or_task`` is a :class:`Samples`, an ``(X, y)`` pair, a
    :class:`Population` or a bare :class:`Task` (population, default MC size).
    ``weights`` multiplies the per-row loss of empirical data.
    """
    if isinstance(data_or_task, Task):
        data_or_task = Population(data_or_task, seed=cfg.seed)
    data = as_weighted(data_or_task, weights)
    theta = _initial_theta(data.X.shape[1], data, cfg)
    run = _newton if cfg.optimizer == "newton" else _momentum
    theta, trace, gnorm, ok = run(theta, data, spec, cfg)
    return TrainResult(LinearClassifier.from_theta(theta), trace, gnorm, ok)


def decision_boundary_2d(clf: LinearClassifier, x_range=(-6.0, 6.0), n: int = 101) -> np.ndarray:
    """Points on w @ x + b = 0, spaced evenly along the axis the line spans best."""
    w, b = clf.w, clf.b
    if w.shape != (2,):
        raise ValueError("decision_boundary_2d needs a 2-D classifier")
    if not np.any(w):
        raise NoBoundaryError("w = 0 has no decision boundary")
    s = np.linspace(x_range[0], x_range[1], n)
    if abs(w[0]) >= abs(w[1]):
        # closer to vertical: parametrize by x2
        return np.column_stack([-(b + w[1] * s) / w[0], s])
    return np.column_stack([s, -(b + w[0] * s) / w[1]])
