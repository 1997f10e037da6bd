"""Influence of single training points and ranking / calibration metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .classifier import LinearClassifier
from .gaussmix import LabeledSample
from .losses import Family, LossSpec, margin_loss_derivs
from .train import TrainConfig, as_weighted, fit_linear, objective


class EmptyClassError(ValueError):
    pass


# ---------------------------------------------------------------------------
# influence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfluenceReport:
    point: LabeledSample
    influence_oracle: np.ndarray
    influence_theorem3: np.ndarray | None
    g_value: float | None
    cosine: float | None
    singular: bool
    flagged: bool  # closed form and oracle point in clearly different directions


def _augment(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([X, np.ones((X.shape[0], 1))])


def point_gradient(clf: LinearClassifier, spec: LossSpec, z: LabeledSample, link="logistic"):
    m = clf.margin(np.atleast_2d(z.x))
    _, d1, _ = margin_loss_derivs(spec, np.array([2 * z.y - 1]), m, link)
    return d1[0] * _augment(z.x)[0]


def g_alpha(alpha: float, y, margin):
    """The weight function of the closed-form alpha-loss influence, labels y in {0, 1}."""
    y = np.asarray(y, dtype=float)
    m = np.asarray(margin, dtype=float)
    p = 1.0 / (alpha - 2.0)
    pos = np.exp(-y * m)
    neg = np.exp((1.0 - y) * m)
    return -y * (1.0 + pos) ** p * pos + (1.0 - y) * (1.0 + neg) ** p * neg


def influence(samples, clf: LinearClassifier, spec: LossSpec, z_star: LabeledSample, link="logistic") -> InfluenceReport:
    """-H^-1 grad ell(z*) at theta = (w, b), H the mean per-sample Hessian.

    For the alpha family the closed form g(z*) / sum_i g(z_i) (X'X/n)^-1 x*
    is evaluated too (on the bias-augmented design) and compared by cosine.
    """
    data = as_weighted(samples)
    _, _, H = objective(clf.theta, data, spec, link, order=2)
    grad = point_gradient(clf, spec, z_star, link)
    singular = np.linalg.cond(H) > 1e12
    Hinv = np.linalg.pinv(H) if singular else np.linalg.inv(H)
    oracle = -Hinv @ grad

    thm = g_val = cos = None
    flagged = False
    if spec.family is Family.ALPHA:
        Xt = _augment(data.X)
        n = Xt.shape[0]
        g_all = g_alpha(spec.alpha, data.y, clf.margin(data.X))
        g_val = float(g_alpha(spec.alpha, z_star.y, clf.margin(np.atleast_2d(z_star.x)))[0])
        thm = g_val / g_all.sum() * np.linalg.solve(Xt.T @ Xt / n, _augment(z_star.x)[0])
        denom = np.linalg.norm(thm) * np.linalg.norm(oracle)
        cos = float(thm @ oracle / denom) if denom > 0 else None
        flagged = cos is None or cos <= 0.9
    return InfluenceReport(z_star, oracle, thm, g_val, cos, bool(singular), flagged)


def upweight_influence(samples, spec: LossSpec, index: int, eps: float = 1e-3, cfg: TrainConfig | None = None, link="logistic"):
    """(theta(eps) - theta) / eps, refitting with (1/n) sum ell + eps ell(z_index).

    Returns the finite-difference influence and the base fit.
    """
    cfg = cfg or TrainConfig(optimizer="newton", tol=1e-10, max_iter=200, link=link)
    data = as_weighted(samples)
    n = data.X.shape[0]
    base = fit_linear((data.X, data.y), spec, cfg)
    w = np.ones(n)
    w[index] += n * eps
    bumped = fit_linear((data.X, data.y), spec, cfg.replace(init="explicit", init_w=tuple(base.classifier.w), init_b=base.classifier.b), weights=w)
    return (bumped.classifier.theta - base.classifier.theta) / eps, base


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _split(scores_pos, scores_neg):
    pos = np.asarray(scores_pos, dtype=float).ravel()
    neg = np.asarray(scores_neg, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyClassError("both classes need at least one score")
    return pos, neg


def auc(scores_pos, scores_neg) -> float:
    """Mann-Whitney estimate of P(score+ > score-), ties counted as 1/2."""
    pos, neg = _split(scores_pos, scores_neg)
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def roc_curve(scores_pos, scores_neg):
    """(fpr, tpr) at every distinct threshold, from (0, 0) to (1, 1)."""
    pos, neg = _split(scores_pos, scores_neg)
    s = np.concatenate([pos, neg])
    lab = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    order = np.argsort(-s, kind="mergesort")
    s, lab = s[order], lab[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]  # end of each tie group
    tp = np.cumsum(lab)[last]
    fp = (last + 1) - tp
    return np.r_[0.0, fp / neg.size], np.r_[0.0, tp / pos.size]


def partial_auc(scores_pos, scores_neg, fpr_cap: float = 0.01, standardized: bool = True) -> float:
    """Area under the ROC curve for FPR in [0, fpr_cap].

    With ``standardized`` the McClish correction maps a random ranking to 0.5
    and a perfect one to 1.
    """
    if not 0 < fpr_cap <= 1:
        raise ValueError("fpr_cap must lie in (0, 1]")
    fpr, tpr = roc_curve(scores_pos, scores_neg)
    tpr_cap = np.interp(fpr_cap, fpr, tpr) if fpr_cap < 1 else 1.0
    keep = fpr < fpr_cap
    x = np.r_[fpr[keep], fpr_cap]
    y = np.r_[tpr[keep], tpr_cap]
    # vertical ROC jumps sit at equal x and add no area; trapezoids handle tie segments
    area = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    if not standardized:
        return area
    lo = fpr_cap**2 / 2.0
    return 0.5 * (1.0 + (area - lo) / (fpr_cap - lo))


def recall_at_fpr(scores_pos, scores_neg, fpr_point: float = 0.001) -> float:
    """TPR at the threshold whose empirical FPR is the largest value <= fpr_point."""
    fpr, tpr = roc_curve(scores_pos, scores_neg)
    return float(tpr[fpr <= fpr_point + 1e-15].max())


def brier(labels, probabilities) -> float:
    labels = np.asarray(labels, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    if labels.shape != probs.shape:
        raise ValueError(f"length mismatch: {labels.shape} vs {probs.shape}")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return float(np.mean((probs - labels) ** 2))


@dataclass(frozen=True)
class MetricReport:
    auc: float
    op_auc: float
    recall_at_fpr: float
    accuracy: float
    brier: float
    low_resolution: bool = False  # too few negatives to resolve fpr_point


def partial_metrics(
    scores_pos, scores_neg, fpr_cap: float = 0.01, fpr_point: float = 0.001, probabilities: bool = False
) -> MetricReport:
    """All ranking and calibration metrics for one scored sample.

    Scores are margins (probability sigmoid(score), decision threshold 0)
    unless ``probabilities`` is set (threshold 0.5).
    """
    if not (0 < fpr_cap < 1 and 0 < fpr_point < 1):
        raise ValueError("fpr_cap and fpr_point must lie in (0, 1)")
    pos, neg = _split(scores_pos, scores_neg)
    p_pos, p_neg = (pos, neg) if probabilities else (expit(pos), expit(neg))
    labels = np.r_[np.ones(pos.size), np.zeros(neg.size)]
    probs = np.r_[p_pos, p_neg]
    return MetricReport(
        auc=auc(pos, neg),
        op_auc=partial_auc(pos, neg, fpr_cap),
        recall_at_fpr=recall_at_fpr(pos, neg, fpr_point),
        accuracy=float(np.mean((probs > 0.5) == (labels == 1))),
        brier=brier(labels, probs),
        low_resolution=neg.size < 1.0 / fpr_point,
    )
