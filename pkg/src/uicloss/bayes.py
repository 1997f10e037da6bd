"""Pointwise Bayes risk, f-functions and statistical information.

For a prior pi and likelihood ratio t = dP/dQ the f-function of a loss is

    f^pi(t) = L(pi) - (pi t + 1 - pi) L(pi t / (pi t + 1 - pi))

where L is the pointwise Bayes risk.  Averaging f^pi over Q gives the
statistical information, the drop in Bayes risk from knowing eta(x).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logit

from .gaussmix import Task
from .losses import EPS_CLIP, DomainError, Family, LossSpec, pointwise_risk
from .rng import substream

GOLDEN_TOL = 1e-10
DEFAULT_T_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 5.0)
DEFAULT_PI_GRID = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)

_INVGOLD = (np.sqrt(5.0) - 1.0) / 2.0
_LOGIT_LO, _LOGIT_HI = float(logit(EPS_CLIP)), float(logit(1.0 - EPS_CLIP))


class UnsupportedFamilyError(ValueError):
    pass


@dataclass(frozen=True)
class BayesRiskResult:
    eta: object
    minimizer: object
    value: object


def _check_unit(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


def _golden_minimize(fun, n: int, grid: int = 241):
    """Minimize fun(z) over logit z for n independent problems at once.

    A coarse grid scan picks the bracketing cell, then golden-section search
    shrinks it.  The logit bracket is driven below 4 * GOLDEN_TOL, which
    bounds the yhat bracket by GOLDEN_TOL (dyhat/dz <= 1/4) and keeps the
    relative accuracy of tiny minimizers.
    """
    zs = np.linspace(_LOGIT_LO, _LOGIT_HI, grid)
    vals = np.stack([fun(np.full(n, z)) for z in zs])
    k = np.argmin(vals, axis=0)
    step = zs[1] - zs[0]
    lo = np.maximum(zs[k] - step, _LOGIT_LO)
    hi = np.minimum(zs[k] + step, _LOGIT_HI)
    c = hi - _INVGOLD * (hi - lo)
    d = lo + _INVGOLD * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(80):
        if np.all(hi - lo < 4.0 * GOLDEN_TOL):
            break
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        c_next = np.where(left, hi - _INVGOLD * (hi - lo), d)
        d_next = np.where(left, c, lo + _INVGOLD * (hi - lo))
        f_new = fun(np.where(left, c_next, d_next))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    z = np.where(fc < fd, c, d)
    return z


def _golden(spec: LossSpec, eta: np.ndarray):
    flat = eta.ravel()

    def risk(z):
        return pointwise_risk(spec, flat, expit(z)).value

    z = _golden_minimize(risk, flat.size)
    yhat = expit(z)
    value = risk(z)
    # the infimum may sit on the clamp boundary; compare the grid ends too
    for edge in (_LOGIT_LO, _LOGIT_HI):
        v_edge = risk(np.full(flat.size, edge))
        better = v_edge < value
        yhat = np.where(better, expit(edge), yhat)
        value = np.where(better, v_edge, value)
    return yhat.reshape(eta.shape), value.reshape(eta.shape)


def _closed_form(spec: LossSpec, eta: np.ndarray):
    fam = spec.family
    if fam is Family.CE or (fam in (Family.ALPHA, Family.TBL) and spec.alpha == 1.0 and spec.cpen == 0.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(eta > 0, -eta * np.log(eta), 0.0)
            b = np.where(eta < 1, -(1.0 - eta) * np.log1p(-eta), 0.0)
        return eta.copy(), a + b
    if fam is Family.SQUARE:
        return eta.copy(), eta * (1.0 - eta)
    if fam is Family.ALPHA or (fam is Family.TBL and spec.cpen == 0.0):
        a = spec.alpha
        with np.errstate(divide="ignore"):
            la, lb = a * np.log(eta), a * np.log1p(-eta)
        ea, eb = np.exp(la), np.exp(lb)
        # (eta^a + (1-eta)^a)^(1/a) - 1, written to survive eta -> 0
        inner = ea + np.expm1(lb)
        value = a / (a - 1.0) * -np.expm1(np.log1p(inner) / a)
        return ea / (ea + eb), value
    return None


def pointwise_bayes_risk(spec: LossSpec, eta) -> BayesRiskResult:
    """min over yhat of the eta-average loss, with its minimizer.

    CE, square and alpha (and TBL with C = 0) use closed forms; every other
    family is minimized numerically in logit space over the clamped range.
    """
    eta_arr = _check_unit("eta", eta)
    out = _closed_form(spec, eta_arr)
    if out is None:
        out = _golden(spec, np.atleast_1d(eta_arr))
        out = tuple(np.reshape(o, eta_arr.shape) for o in out)
    minimizer, value = out
    if np.ndim(eta) == 0:
        minimizer, value = float(minimizer), float(value)
    return BayesRiskResult(eta, minimizer, value)


def bayes_risk(spec: LossSpec, eta):
    return pointwise_bayes_risk(spec, eta).value


def _check_pi_t(pi, t):
    if not 0.0 < pi < 1.0:
        raise DomainError(f"pi must lie in (0, 1), got {pi}")
    t = np.asarray(t, dtype=float)
    if np.any(~(t >= 0.0)):
        raise DomainError("t must be >= 0")
    return t


def f_exact(spec: LossSpec, pi: float, t):
    """f^pi(t) from the pointwise Bayes risk; exactly 0 at t = 1."""
    t_arr = _check_pi_t(pi, t)
    scale = pi * t_arr + 1.0 - pi
    eta = pi * t_arr / scale
    l_pi = bayes_risk(spec, np.float64(pi))
    value = l_pi - scale * bayes_risk(spec, eta)
    value = np.where(t_arr == 1.0, 0.0, value)
    return float(value) if np.ndim(t) == 0 else value


def f_asymptotic(spec: LossSpec, pi: float, t):
    """Leading-order f-function as pi -> 0.

    TBL uses the alpha form times exp(-alpha C): near eta = 0 its Bayes risk
    behaves like the alpha risk at eta exp(-C).
    """
    t_arr = _check_pi_t(pi, t)
    fam = spec.family
    nll = -pi * np.log(pi) * (1.0 - t_arr)
    if fam is Family.ERF:
        raise UnsupportedFamilyError("no closed-form asymptotic f-function for the erf loss")
    if fam in (Family.CE, Family.POLY):
        value = nll
    elif fam is Family.SQUARE:
        value = pi * (1.0 - t_arr)
    elif fam is Family.FOCAL:
        value = nll / (spec.gamma + 1.0)
    elif fam is Family.VS:
        value = spec.delta1 * nll
    elif spec.alpha == 1.0:
        value = nll
    else:
        a = spec.alpha
        value = pi**a * (1.0 - t_arr**a) / (1.0 - a)
        if fam is Family.TBL:
            value = value * np.exp(-a * spec.cpen)
    return float(value) if np.ndim(t) == 0 else value


def tbl_reduced_minimizer(spec: LossSpec, eta):
    """Small-eta root of the TBL stationarity condition, yhat/(1-yhat) = (eta e^-C / (1-eta))^alpha."""
    if spec.family is not Family.TBL:
        raise UnsupportedFamilyError("tbl_reduced_minimizer needs a TBL spec")
    eta = np.asarray(eta, dtype=float)
    x = (eta * np.exp(-spec.cpen) / (1.0 - eta)) ** spec.alpha
    return x / (1.0 + x)


def verify_uic_limit(spec: LossSpec, t: float, pi_sequence) -> list[float]:
    """Ratios f_exact / f_asymptotic along a decreasing sequence of priors."""
    pis = np.asarray(pi_sequence, dtype=float)
    if pis.size == 0 or np.any(np.diff(pis) >= 0) or np.any(pis <= 0) or np.any(pis >= 0.1):
        raise DomainError("pi_sequence must be strictly decreasing inside (0, 0.1)")
    if spec.family is Family.ERF:
        raise UnsupportedFamilyError("no closed-form asymptotic f-function for the erf loss")
    if t == 1.0:
        return [1.0] * pis.size
    return [f_exact(spec, p, t) / f_asymptotic(spec, p, t) for p in pis]


@dataclass(frozen=True)
class FCurve:
    spec: LossSpec
    pi_grid: tuple
    t_grid: tuple
    exact: np.ndarray
    asymptotic: np.ndarray  # NaN where the family has no asymptotic form

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.exact / self.asymptotic
        r[:, np.asarray(self.t_grid) == 1.0] = 1.0
        return r


def f_curve(spec: LossSpec, pi_grid=DEFAULT_PI_GRID, t_grid=DEFAULT_T_GRID) -> FCurve:
    t = np.asarray(t_grid, dtype=float)
    exact = np.stack([f_exact(spec, p, t) for p in pi_grid])
    if spec.family is Family.ERF:
        asym = np.full_like(exact, np.nan)
    else:
        asym = np.stack([f_asymptotic(spec, p, t) for p in pi_grid])
    return FCurve(spec, tuple(pi_grid), tuple(t_grid), exact, asym)


class InfoEstimate(NamedTuple):
    value: float
    stderr: float
    dual_value: float
    dual_stderr: float

    @property
    def agree(self) -> bool:
        """The two estimators agree within three combined standard errors."""
        return abs(self.value - self.dual_value) <= 3.0 * np.hypot(self.stderr, self.dual_stderr)


def _mean_se(v):
    return float(np.mean(v)), float(np.std(v, ddof=1) / np.sqrt(v.size))


def statistical_information(task: Task, mc_samples: int = 100_000, seed: int = 0, spec: LossSpec | None = None) -> InfoEstimate:
    """Two Monte Carlo estimates of the statistical information of ``task``.

    ``value`` averages f^pi(p/q) over draws from Q.  ``dual_value`` is
    L(pi) - E[L(eta(x))] with the expectation stratified over the two classes.
    """
    spec = spec or task.loss
    if spec is None:
        raise ValueError("no loss given")
    if mc_samples < 1000:
        raise ValueError("mc_samples must be >= 1000")
    pi, log_rho = task.pi, np.log(task.rho)
    l_pi = bayes_risk(spec, np.float64(pi))

    xq = task.majority.sample(substream(seed, "info", "q"), mc_samples)
    log_t = task.minority.log_density(xq) - task.majority.log_density(xq)
    eta = expit(log_rho + log_t)
    # pi t + 1 - pi = (1 - pi) / (1 - eta)
    scale = np.exp(np.logaddexp(np.log(pi) + log_t, np.log1p(-pi)))
    f = np.where(log_t == 0.0, 0.0, l_pi - scale * bayes_risk(spec, eta))
    value, se = _mean_se(f)

    parts = []
    for name, mix, w in (("p", task.minority, pi), ("q", task.majority, 1.0 - pi)):
        x = mix.sample(substream(seed, "info", "dual", name), mc_samples)
        lr = task.minority.log_density(x) - task.majority.log_density(x)
        parts.append((w, bayes_risk(spec, expit(log_rho + lr))))
    dual = l_pi - sum(w * v.mean() for w, v in parts)
    dual_se = np.sqrt(sum(w * w * v.var(ddof=1) / v.size for w, v in parts))
    return InfoEstimate(value, se, float(dual), float(dual_se))
