"""Binary classification losses ell(y, yhat) with analytic derivatives.

Every family is evaluated through the *correct-class margin* s, the
log-odds of the probability assigned to the observed label.  For a label
y in {0, 1} and a prediction yhat = P(Y=1):

    s = log(yhat / (1 - yhat))     if y == 1
    s = log((1 - yhat) / yhat)     if y == 0

Working in s keeps the tails accurate (no clamping is needed when the
input is already a margin) and gives both the probability-space derivatives
used by the Bayes-risk code and the margin-space derivatives used by the
trainers from one set of formulas.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, log_expit, ndtr

EPS_CLIP = 1e-12
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class DomainError(ValueError):
    """Argument outside the domain of a loss or of one of its hyperparameters."""


class Family(str, enum.Enum):
    CE = "ce"
    SQUARE = "square"
    ERF = "erf"
    FOCAL = "focal"
    POLY = "poly"
    VS = "vs"
    ALPHA = "alpha"
    TBL = "tbl"


# hyperparameters that each family reads; everything else is ignored
_FAMILY_PARAMS = {
    Family.CE: (),
    Family.SQUARE: (),
    Family.ERF: (),
    Family.FOCAL: ("gamma",),
    Family.POLY: ("epsilon",),
    Family.VS: ("delta1",),
    Family.ALPHA: ("alpha",),
    Family.TBL: ("alpha", "cpen"),
}


@dataclass(frozen=True)
class LossSpec:
    """A loss family plus its hyperparameters.

    ``delta1`` is the minority-class multiplicative logit scale of the
    vector-scaling loss (the majority scale is fixed to 1 and the additive
    term to 0).  ``alpha`` is shared by the alpha and TBL families; ``cpen``
    is the TBL influence penalty C.
    """

    family: Family
    gamma: float = 0.0
    epsilon: float = 0.0
    delta1: float = 1.0
    alpha: float = 1.0
    cpen: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("gamma", "epsilon", "delta1", "alpha", "cpen"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        fam = self.family
        if fam is Family.FOCAL and self.gamma < 0:
            raise DomainError(f"focal gamma must be >= 0, got {self.gamma}")
        if fam is Family.POLY and self.epsilon < -1:
            raise DomainError(f"poly epsilon must be >= -1, got {self.epsilon}")
        if fam is Family.VS and not 0 < self.delta1 <= 1:
            raise DomainError(f"vs delta1 must lie in (0, 1], got {self.delta1}")
        if fam in (Family.ALPHA, Family.TBL) and not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if fam is Family.TBL and self.cpen < 0:
            raise DomainError(f"tbl cpen must be >= 0, got {self.cpen}")

    @property
    def params(self) -> dict:
        return {k: getattr(self, k) for k in _FAMILY_PARAMS[self.family]}

    @property
    def label(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family.value}({inner})" if inner else self.family.value

    @property
    def symmetric(self) -> bool:
        return self.family is not Family.VS

    def to_dict(self) -> dict:
        return {"family": self.family.value, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        d = dict(d)
        unknown = set(d) - {"family", *asdict(cls(Family.CE)).keys()}
        if unknown:
            raise DomainError(f"unknown loss fields: {sorted(unknown)}")
        return cls(**d)


def normal_cdf(x):
    return ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


# ---------------------------------------------------------------------------
# correct-class kernels: each returns (value, d/ds, d2/ds2)
#   s  correct-class margin, p = sigmoid(s), q = 1 - p, lp = log p, lq = log q
# ---------------------------------------------------------------------------


def _ce(s, p, q, lp, lq):
    return -lp, -q, p * q


def _square(s, p, q, lp, lq):
    return q * q, -2.0 * p * q * q, 2.0 * p * q * q * (2.0 * p - q)


def _erf(s, p, q, lp, lq):
    # s*Psi(s) - s + Psi'(s), written in the cancellation-free form
    tail = ndtr(-s)
    value = normal_pdf(s) - s * tail
    return value, -tail, normal_pdf(s)


def _focal(s, p, q, lp, lq, gamma):
    if gamma == 0.0:
        return _ce(s, p, q, lp, lq)
    qg = np.exp(gamma * lq)
    value = -qg * lp
    d1 = qg * (gamma * p * lp - q)
    d2 = p * qg * (-gamma * gamma * p * lp + gamma * q * lp + 2.0 * gamma * q + q)
    return value, d1, d2


def _poly(s, p, q, lp, lq, epsilon):
    pq = p * q
    return -lp + epsilon * q, -q - epsilon * pq, pq * (1.0 + epsilon * (p - q))


def _alpha(s, p, q, lp, lq, alpha):
    if alpha == 1.0:
        return _ce(s, p, q, lp, lq)
    k = 1.0 - 1.0 / alpha
    pk = np.exp(k * lp)
    value = alpha / (alpha - 1.0) * -np.expm1(k * lp)
    return value, -pk * q, pk * q * (p - k * q)


def _tbl(s, p, q, lp, lq, alpha, cpen):
    a, a1, a2 = _alpha(s, p, q, lp, lq, alpha)
    if cpen == 0.0:
        return a, a1, a2
    # penalty exp(C(p - 1)) for the correct-class probability p
    e = np.exp(-cpen * q)
    cpq = cpen * p * q
    value = a * e
    d1 = e * (a1 + a * cpq)
    d2 = e * (a2 + 2.0 * a1 * cpq + a * (cpq * cpq + cpq * (q - p)))
    return value, d1, d2


def _vs_minority(s, delta1):
    # log(1 + exp(-delta1 * s)) for the minority label
    value = np.logaddexp(0.0, -delta1 * s)
    return value, -delta1 * expit(-delta1 * s), delta1 * delta1 * expit(delta1 * s) * expit(-delta1 * s)


def _kernel(spec: LossSpec, y, s, p, q, lp, lq):
    fam = spec.family
    if fam is Family.CE:
        return _ce(s, p, q, lp, lq)
    if fam is Family.SQUARE:
        return _square(s, p, q, lp, lq)
    if fam is Family.ERF:
        return _erf(s, p, q, lp, lq)
    if fam is Family.FOCAL:
        return _focal(s, p, q, lp, lq, spec.gamma)
    if fam is Family.POLY:
        return _poly(s, p, q, lp, lq, spec.epsilon)
    if fam is Family.ALPHA:
        return _alpha(s, p, q, lp, lq, spec.alpha)
    if fam is Family.TBL:
        return _tbl(s, p, q, lp, lq, spec.alpha, spec.cpen)
    # VS: minority uses the scaled logit, majority is plain cross entropy
    v0, d0, dd0 = _ce(s, p, q, lp, lq)
    v1, d1, dd1 = _vs_minority(s, spec.delta1)
    minority = y == 1
    return (np.where(minority, v1, v0), np.where(minority, d1, d0), np.where(minority, dd1, dd0))


def _check_labels(y, allowed):
    y = np.asarray(y)
    if not np.all(np.isin(y, allowed)):
        raise DomainError(f"labels must be in {allowed}")
    return y


def _prob_space(spec: LossSpec, y, etahat):
    """(value, d/dyhat, d2/dyhat2) after clamping yhat."""
    y = _check_labels(y, (0, 1))
    etahat = np.asarray(etahat, dtype=float)
    if np.any(~(etahat >= 0.0) | ~(etahat <= 1.0)):
        raise DomainError("etahat must lie in [0, 1]")
    yhat = np.clip(etahat, EPS_CLIP, 1.0 - EPS_CLIP)
    one = y == 1
    p = np.where(one, yhat, 1.0 - yhat)
    q = np.where(one, 1.0 - yhat, yhat)
    lp, lq = np.log(p), np.log(q)
    s = lp - lq
    v, ds, dds = _kernel(spec, y, s, p, q, lp, lq)
    pq = p * q
    # d/dp = F'/(pq); d2/dp2 = (F'' - F'(q - p)) / (pq)^2; dp/dyhat = +-1
    dp = ds / pq
    dpp = (dds - ds * (q - p)) / (pq * pq)
    sign = np.where(one, 1.0, -1.0)
    return v, sign * dp, dpp


def loss_value(spec: LossSpec, y, etahat):
    """ell(y, etahat) for labels y in {0, 1}; etahat is clamped to [EPS_CLIP, 1 - EPS_CLIP]."""
    return _prob_space(spec, y, etahat)[0]


def loss_grad(spec: LossSpec, y, etahat):
    """Derivative of ell(y, etahat) with respect to etahat."""
    return _prob_space(spec, y, etahat)[1]


def loss_hess(spec: LossSpec, y, etahat):
    """Second derivative of ell(y, etahat) with respect to etahat."""
    return _prob_space(spec, y, etahat)[2]


@dataclass(frozen=True)
class PointwiseRisk:
    eta: object
    etahat: object
    value: object


def pointwise_risk(spec: LossSpec, eta, etahat) -> PointwiseRisk:
    """The eta-average (1 - eta) ell(0, etahat) + eta ell(1, etahat)."""
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(~(eta_arr >= 0.0) | ~(eta_arr <= 1.0)):
        raise DomainError("eta must lie in [0, 1]")
    value = (1.0 - eta_arr) * loss_value(spec, 0, etahat) + eta_arr * loss_value(spec, 1, etahat)
    return PointwiseRisk(eta, etahat, value)


def _margin_space(spec: LossSpec, y01, margin):
    margin = np.asarray(margin, dtype=float)
    sign = np.where(y01 == 1, 1.0, -1.0)
    s = sign * margin
    p, q = expit(s), expit(-s)
    lp, lq = log_expit(s), log_expit(-s)
    v, ds, dds = _kernel(spec, y01, s, p, q, lp, lq)
    return v, sign * ds, dds


def margin_loss_derivs(spec: LossSpec, y_pm, margin, link: str = "logistic"):
    """(value, d/dmargin, d2/dmargin2) of ell(y, link(margin)).

    ``link="logistic"`` composes with yhat = sigmoid(margin).  ``link="linear"``
    is only defined for the square loss and uses yhat = (1 + margin) / 2, so the
    loss is the least-squares fit of the +-1 labels, (y_pm - margin)^2 / 4.
    """
    y_pm = _check_labels(y_pm, (-1, 1))
    y01 = (y_pm + 1) // 2
    if link == "logistic":
        return _margin_space(spec, y01, margin)
    if link == "linear":
        if spec.family is not Family.SQUARE:
            raise DomainError("the linear link is only defined for the square loss")
        r = np.asarray(margin, dtype=float) - y_pm
        return 0.25 * r * r, 0.5 * r, np.full_like(r, 0.5)
    raise DomainError(f"unknown link {link!r}")


def margin_loss_value(spec: LossSpec, y_pm, margin, link: str = "logistic"):
    return margin_loss_derivs(spec, y_pm, margin, link)[0]

