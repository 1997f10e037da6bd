"""Loss functions, Bayes risk and limiting classifiers under extreme class imbalance."""

__version__ = "0.1.0"

from .bayes import (
    BayesRiskResult,
    FCurve,
    f_asymptotic,
    f_curve,
    f_exact,
    pointwise_bayes_risk,
    statistical_information,
    verify_uic_limit,
)
from .classifier import LinearClassifier, angle_between
from .diagnostics import auc, brier, influence, partial_metrics
from .gaussmix import GaussianMixture, LabeledSample, Samples, Task, density, population_risk, posterior_eta, sample
from .limits import LimitResult, SimplexWeights, limit_alpha, limit_erf, limit_square, optimal_auc_direction
from .losses import DomainError, Family, LossSpec, PointwiseRisk, loss_grad, loss_hess, loss_value, margin_loss_value, pointwise_risk
from .train import Population, TrainConfig, TrainResult, decision_boundary_2d, fit_linear

__all__ = [
    "BayesRiskResult",
    "DomainError",
    "FCurve",
    "Family",
    "GaussianMixture",
    "LabeledSample",
    "LimitResult",
    "LinearClassifier",
    "LossSpec",
    "PointwiseRisk",
    "Population",
    "Samples",
    "SimplexWeights",
    "Task",
    "TrainConfig",
    "TrainResult",
    "angle_between",
    "auc",
    "brier",
    "decision_boundary_2d",
    "density",
    "f_asymptotic",
    "f_curve",
    "f_exact",
    "fit_linear",
    "influence",
    "limit_alpha",
    "limit_erf",
    "limit_square",
    "loss_grad",
    "loss_hess",
    "loss_value",
    "margin_loss_value",
    "optimal_auc_direction",
    "partial_metrics",
    "pointwise_bayes_risk",
    "pointwise_risk",
    "population_risk",
    "posterior_eta",
    "sample",
    "statistical_information",
    "verify_uic_limit",
]
