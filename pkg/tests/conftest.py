import numpy as np
import pytest

from uicloss.experiments.config import PRESETS
from uicloss.gaussmix import GaussianMixture, Task
from uicloss.losses import LossSpec

# one setting list per family; hyperparameter-free families vary ignored fields
HYPER_GRID = {
    "ce": [dict(gamma=g) for g in np.linspace(0, 3, 20)],
    "square": [dict(epsilon=e) for e in np.linspace(-1, 3, 20)],
    "erf": [dict(alpha=a) for a in np.linspace(0.2, 1, 20)],
    "focal": [dict(gamma=g) for g in np.linspace(0, 5, 20)],
    "poly": [dict(epsilon=e) for e in np.linspace(-1, 5, 20)],
    "vs": [dict(delta1=d) for d in np.linspace(0.05, 1, 20)],
    "alpha": [dict(alpha=a) for a in np.linspace(0.2, 1, 20)],
    "tbl": [dict(alpha=a, cpen=c) for a, c in zip(np.linspace(0.3, 1, 20), np.linspace(0, 3, 20))],
}

ETA_GRID = np.r_[0.01, np.arange(0.05, 0.951, 0.05), 0.99]


def all_specs():
    return [LossSpec(fam, **kw) for fam, grid in HYPER_GRID.items() for kw in grid]


def preset_task(name="sec23", loss=None):
    p = PRESETS[name]
    return Task(p["pi"], GaussianMixture.from_dict(p["minority"]), GaussianMixture.from_dict(p["majority"]), loss)


@pytest.fixture
def sec23():
    return preset_task("sec23")


def random_mixture(rng, k, d=2, spread=2.0):
    w = rng.dirichlet(np.ones(k))
    means = rng.normal(0, spread, (k, d))
    covs = []
    for _ in range(k):
        a = rng.normal(size=(d, d))
        covs.append(a @ a.T + 0.3 * np.eye(d))
    return GaussianMixture(w, means, np.array(covs))
