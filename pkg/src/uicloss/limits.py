"""Limiting linear classifiers of Gaussian-mixture tasks as rho -> 0.

The alpha and erf limits are solutions of a convex program of the form

    min_w  G(w) = sum_g c_g log sum_i pi_g^i exp(a_g^i(w)),
    a_g^i(w)   = s_g w @ mu_g^i + s_g^2 w @ Sigma_g^i @ w / 2,

one term per class.  Its dual over a product of simplices is

    H(xi) = sum_g c_g KL(xi_g || pi_g) + r' A^-1 r / 2,
    A = sum_g c_g s_g^2 S_g(xi),   r = sum_g c_g s_g M_g(xi),

with S_g, M_g the xi-weighted covariances and means, and the primal point
is theta(xi) = -A^-1 r.  At the optimum xi_g is pi_g tilted by exp(a_g).
Both the damped fixed-point iteration on theta and entropic mirror descent
on H are provided; H is strictly convex so they must land on the same point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr

from .classifier import LinearClassifier
from .gaussmix import GaussianMixture, Task

DAMPING = 0.5
TOL = 1e-10
MAX_ITER = 10_000


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SimplexWeights:
    xi_minus: np.ndarray
    xi_plus: np.ndarray | None = None


@dataclass(frozen=True)
class LimitResult:
    classifier: LinearClassifier
    weights: SimplexWeights
    converged: bool
    iterations: int
    residual: float
    method: str = "closed_form"
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Group:
    c: float
    s: float
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def log_weights(self):
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def exponents(self, theta):
        """a^i(theta) for every component."""
        quad = np.einsum("i,kij,j->k", theta, self.covs, theta)
        return self.s * (self.means @ theta) + 0.5 * self.s**2 * quad

    def tilt(self, theta):
        z = self.log_weights + self.exponents(theta)
        return np.exp(z - logsumexp(z))


class _Program:
    def __init__(self, groups):
        self.groups = groups

    def theta(self, xis):
        d = self.groups[0].means.shape[1]
        A = np.zeros((d, d))
        r = np.zeros(d)
        for g, xi in zip(self.groups, xis):
            A += g.c * g.s**2 * np.einsum("k,kij->ij", xi, g.covs)
            r += g.c * g.s * (xi @ g.means)
        try:
            return -np.linalg.solve(A, r), A, r
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("singular matrix in the w-update") from exc

    def tilts(self, theta):
        return [g.tilt(theta) for g in self.groups]

    def primal(self, theta):
        return sum(g.c * logsumexp(g.log_weights + g.exponents(theta)) for g in self.groups)

    def dual(self, xis):
        theta, A, r = self.theta(xis)
        kl = 0.0
        for g, xi in zip(self.groups, xis):
            pos = xi > 0
            kl += g.c * np.sum(xi[pos] * (np.log(xi[pos]) - g.log_weights[pos]))
        return kl - 0.5 * r @ theta, theta

    def dual_grad(self, xis, theta):
        grads = []
        for g, xi in zip(self.groups, xis):
            with np.errstate(divide="ignore"):
                lx = np.log(xi)
            grads.append(g.c * (lx - g.log_weights + 1.0 - g.exponents(theta)))
        return grads

    def defect(self, xis):
        """Max-norm gap between xi and the tilt it induces, plus the induced theta."""
        theta = self.theta(xis)[0]
        new = self.tilts(theta)
        return max(np.max(np.abs(a - b)) for a, b in zip(new, xis)), theta

    def initial(self):
        return [g.weights.copy() for g in self.groups]


def _fixed_point(prog: _Program, max_iter: int, tol: float):
    theta = prog.theta(prog.initial())[0]
    lam = DAMPING
    best = (np.inf, theta)
    prev = np.inf
    for it in range(1, max_iter + 1):
        target = prog.theta(prog.tilts(theta))[0]
        res = float(np.max(np.abs(target - theta))) if theta.size else 0.0
        if res < best[0]:
            best = (res, theta)
        if res < tol:
            return theta, True, it, res
        if res > prev:
            lam = max(lam / 2.0, 1e-3)
        prev = res
        theta = (1.0 - lam) * theta + lam * target
    return best[1], False, max_iter, best[0]


def _mirror_descent(prog: _Program, max_iter: int, tol: float, step: float = 0.1):
    xis = prog.initial()
    value, theta = prog.dual(xis)
    res = prog.defect(xis)[0]
    for it in range(1, max_iter + 1):
        if res < tol:
            return theta, xis, True, it - 1, res
        grads = prog.dual_grad(xis, theta)
        # Armijo backtracking along the entropic mirror step, growing the step after
        # each success.  Once H is flat to rounding the value test is blind, so the
        # last accepted step is reused as a fixed step from there on.
        flat = False
        while True:
            cand = []
            for xi, gr in zip(xis, grads):
                z = np.log(np.maximum(xi, 1e-300)) - step * (gr - gr.max())
                cand.append(np.exp(z - logsumexp(z)))
            new_value, new_theta = prog.dual(cand)
            slope = sum(gr @ (c - x) for gr, c, x in zip(grads, cand, xis))
            flat = abs(slope) < 1e-13 * (1.0 + abs(value))
            if flat or new_value <= value + 1e-4 * slope or step < 1e-12:
                break
            step *= 0.5
        xis, value, theta = cand, new_value, new_theta
        res = prog.defect(xis)[0]
        if not flat:
            step = min(step * 2.0, 1e3)
    return theta, xis, res < tol, max_iter, res


def _group(c, s, mix: GaussianMixture):
    return _Group(c, s, mix.weights, mix.means, mix.covariances)


def _solve(prog, method, max_iter, tol):
    if method == "fixed_point":
        theta, converged, it, res = _fixed_point(prog, max_iter, tol)
        xis = prog.tilts(theta)
    elif method == "mirror":
        theta, xis, converged, it, res = _mirror_descent(prog, max_iter, tol)
        xis = prog.tilts(theta) if converged else xis
    else:
        raise ValueError(f"unknown method {method!r}")
    return theta, xis, converged, it, res


def limit_square(task: Task) -> LimitResult:
    """w = 2 rho Sigma_-^-1 (mu_+ - mu_-), b = -1 for the least-squares fit of +-1 labels."""
    cov = task.majority.total_covariance
    delta = task.minority.mean - task.majority.mean
    try:
        w = 2.0 * task.rho * np.linalg.solve(cov, delta)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("majority total covariance is singular") from exc
    weights = SimplexWeights(task.majority.weights.copy(), task.minority.weights.copy())
    return LimitResult(LinearClassifier(w, -1.0), weights, True, 0, 0.0)


def limit_alpha(
    task: Task, alpha: float | None = None, max_iter: int = MAX_ITER, tol: float = TOL, method: str = "fixed_point"
) -> LimitResult:
    """Limit of the alpha-loss population minimizer.

    w solves w = (u S_+ + S_-)^-1 (M_+ - M_-) with u = 1/alpha - 1, where the
    minority and majority components are tilted by exp(-u w'mu + u^2 w'Sw/2)
    and exp(w'mu + w'Sw/2).  The offset is b = alpha log(rho A_+ / A_-),
    A_+- the normalizers of the two tilts, so b / log(rho) -> alpha.
    """
    if alpha is None:
        alpha = task.loss.alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    u = 1.0 / alpha - 1.0
    minus = _group(1.0 - alpha, 1.0, task.majority)
    plus = _group(alpha, -u, task.minority)
    prog = _Program([minus, plus])
    theta, xis, converged, it, res = _solve(prog, method, max_iter, tol)
    log_a_plus = logsumexp(plus.log_weights + plus.exponents(theta))
    log_a_minus = logsumexp(minus.log_weights + minus.exponents(theta))
    b = alpha * (np.log(task.rho) + log_a_plus - log_a_minus)
    return LimitResult(
        LinearClassifier(theta, b),
        SimplexWeights(xis[0], xis[1]),
        converged,
        it,
        res,
        method,
        {"G": float(prog.primal(theta)), "H": float(prog.dual(xis)[0])},
    )


def limit_erf(task: Task, max_iter: int = MAX_ITER, tol: float = TOL, method: str = "fixed_point") -> LimitResult:
    """Limit of the erf-loss population minimizer.

    The majority weights xi tilt by exp(v'mu_- + v'Sigma_- v/2) with
    v = Sigma~^-1 (mu_+ - mu~), the minority entering only through its mean;
    then w = v / sqrt(-2 log rho) and b = -sqrt(-2 log rho).
    """
    if task.rho >= 1.0:
        raise ValueError("the erf limit needs rho < 1")
    d = task.dim
    point = _Group(1.0, -1.0, np.ones(1), task.minority.mean[None, :], np.zeros((1, d, d)))
    prog = _Program([_group(1.0, 1.0, task.majority), point])
    v, xis, converged, it, res = _solve(prog, method, max_iter, tol)
    scale = np.sqrt(-2.0 * np.log(task.rho))
    return LimitResult(
        LinearClassifier(v / scale, -scale),
        SimplexWeights(xis[0]),
        converged,
        it,
        res,
        method,
        {"v": v, "H": float(prog.dual(xis)[0])},
    )


def two_gaussian_auc(w, mu_plus, cov_plus, mu_minus, cov_minus) -> float:
    """P(w'x+ > w'x-) = Psi(w'(mu+ - mu-) / sqrt(w'(Sigma+ + Sigma-)w))."""
    w = np.asarray(w, dtype=float)
    delta = np.asarray(mu_plus, float) - np.asarray(mu_minus, float)
    var = w @ (np.asarray(cov_plus, float) + np.asarray(cov_minus, float)) @ w
    if var <= 0:
        return 0.5
    return float(ndtr(w @ delta / np.sqrt(var)))


def optimal_auc_direction(minority: GaussianMixture, majority: GaussianMixture):
    """AUC-optimal linear direction (Sigma+ + Sigma-)^-1 (mu+ - mu-) for single Gaussians."""
    if minority.n_components != 1 or majority.n_components != 1:
        raise ValueError("optimal_auc_direction needs single-Gaussian classes")
    mp, mm = minority.means[0], majority.means[0]
    cp, cm = minority.covariances[0], majority.covariances[0]
    try:
        w = np.linalg.solve(cp + cm, mp - mm)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Sigma+ + Sigma- is singular") from exc
    return w, two_gaussian_auc(w, mp, cp, mm, cm)
