"""Experiment recipes.

Each recipe expands a config into independent cells (one per seed and
hyperparameter), evaluates them on a thread pool, sorts the resulting rows
by a canonical key and writes ``results.csv``, plot-data files and a
``manifest.json``.  Cells that hit a numerical failure are recorded in
``failures.json`` while the completed rows are still written.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .. import __version__
from ..bayes import UnsupportedFamilyError, f_asymptotic, f_exact
from ..classifier import angle_between
from ..diagnostics import influence, partial_metrics
from ..gaussmix import LabeledSample, Samples, Task, population_auc, sample
from ..limits import SingularMatrixError, limit_alpha, limit_erf, limit_square
from ..losses import Family, LossSpec
from ..rng import substream
from ..train import DivergenceError, Population, TrainConfig, decision_boundary_2d, fit_linear
from .config import ExperimentConfig
from .io import load_csv_dataset, write_csv, write_manifest, write_plot_data

RESULT_HEADER = ["experiment", "seed", "loss", "params", "metric", "value"]
NUMERICAL_ERRORS = (DivergenceError, SingularMatrixError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError)

DEFAULT_LOSSES = {
    "boundary": [
        {"family": "ce"},
        {"family": "focal", "gamma": 1.0},
        {"family": "poly", "epsilon": -0.5},
        {"family": "vs", "delta1": 0.5},
        {"family": "alpha", "alpha": 0.5},
    ],
    "fcurve": [
        {"family": "ce"},
        {"family": "square"},
        {"family": "focal", "gamma": 1.0},
        {"family": "poly", "epsilon": -0.5},
        {"family": "vs", "delta1": 0.5},
        {"family": "alpha", "alpha": 0.5},
        {"family": "alpha", "alpha": 0.8},
        {"family": "tbl", "alpha": 0.5, "cpen": 0.5},
        {"family": "erf"},
    ],
    "limit_check": [{"family": "square"}, {"family": "alpha", "alpha": 0.5}, {"family": "erf"}],
    "influence_demo": [{"family": "ce"}, {"family": "alpha", "alpha": 0.5}, {"family": "tbl", "alpha": 0.5, "cpen": 1.0}],
}

ALPHA_GRID = [round(0.2 + 0.05 * k, 2) for k in range(12)]
C_GRID = [0.0, 0.1, 0.3, 0.5, 1.0, 2.0]


@dataclass
class RecipeResult:
    rows: list
    files: list
    failures: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def _pjson(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _slug(spec: LossSpec) -> str:
    return "_".join([spec.family.value] + [f"{k}-{v:g}" for k, v in spec.params.items()])


def _row(exp, seed, spec_label, params, metric, value):
    return (exp, int(seed), spec_label, _pjson(params), metric, float(value))


def _sort_key(row):
    return (row[0], row[2], row[3], row[1], row[4])


def _losses(cfg: ExperimentConfig):
    if cfg.losses:
        return list(cfg.losses)
    return [LossSpec.from_dict(d) for d in DEFAULT_LOSSES.get(cfg.recipe, [])]


def _train_cfg(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    return cfg.train.replace(seed=seed)


def _samples(cfg: ExperimentConfig, task: Task, seed: int) -> Samples:
    counts = cfg.counts
    if counts is None:
        return sample(task, int(cfg.params.get("n", 10_000)), seed)
    return sample(task, seed=seed, counts=counts)


def _run_cells(cells, threads):
    """Evaluate (key, fn) cells, returning rows and failure records."""

    def guarded(cell):
        key, fn = cell
        try:
            return fn(), None
        except NUMERICAL_ERRORS as exc:
            return [], {"cell": key, "error": type(exc).__name__, "message": str(exc)}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(guarded, cells))
    else:
        outs = [guarded(c) for c in cells]
    rows, failures = [], []
    for r, f in outs:
        rows.extend(r)
        if f:
            failures.append(f)
    return rows, failures


# ---------------------------------------------------------------------------
# recipes: each returns (rows, failures, plot_writers)
# plot_writers are (filename, callable(path)) run after all cells finish
# ---------------------------------------------------------------------------


def _boundary(cfg: ExperimentConfig, threads):
    task = cfg.build_task()
    specs = _losses(cfg)
    x_range = tuple(cfg.params.get("x_range", [-6.0, 6.0]))
    fitted = {}

    def cell(seed, spec):
        def run():
            data = _samples(cfg, task, seed)
            res = fit_linear(data, spec, _train_cfg(cfg, seed))
            clf = res.classifier
            fitted[(seed, spec.label)] = clf
            w = clf.w
            return [
                _row("boundary", seed, spec.label, spec.params, "w1", w[0]),
                _row("boundary", seed, spec.label, spec.params, "w2", w[1]),
                _row("boundary", seed, spec.label, spec.params, "b", clf.b),
                _row("boundary", seed, spec.label, spec.params, "angle_deg", np.degrees(np.arctan2(w[1], w[0]))),
                _row("boundary", seed, spec.label, spec.params, "auc", population_auc(task.minority, task.majority, w)),
                _row("boundary", seed, spec.label, spec.params, "grad_norm", res.grad_norm_final),
            ]

        return (f"seed={seed},loss={spec.label}", run)

    rows, failures = _run_cells([cell(s, sp) for s in cfg.seeds for sp in specs], threads)
    ref = specs[0]
    for seed in cfg.seeds:
        base = fitted.get((seed, ref.label))
        for spec in specs[1:]:
            other = fitted.get((seed, spec.label))
            if base is not None and other is not None:
                rows.append(_row("boundary", seed, spec.label, spec.params, f"angle_to_{ref.family.value}", angle_between(base.w, other.w)))

    writers = []
    for (seed, label), clf in sorted(fitted.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        spec = next(s for s in specs if s.label == label)
        if np.any(clf.w):
            pts = decision_boundary_2d(clf, x_range)
            writers.append((f"boundary_{_slug(spec)}_seed{seed}.csv", lambda p, pts=pts: write_plot_data(pts, p)))
    return rows, failures, writers


def _alpha_sweep(cfg: ExperimentConfig, threads):
    task = cfg.build_task()
    alphas = [float(a) for a in cfg.params.get("alphas", ALPHA_GRID)]
    evaluation = cfg.params.get("eval", "population")
    n_test = int(cfg.params.get("n_test", 200_000))

    def cell(seed, a):
        spec = LossSpec("alpha", alpha=a)

        def run():
            data = _samples(cfg, task, seed)
            clf = fit_linear(data, spec, _train_cfg(cfg, seed)).classifier
            out = [_row("alpha_sweep", seed, spec.label, spec.params, "auc_population", population_auc(task.minority, task.majority, clf.w))]
            if evaluation == "holdout":
                test = sample(task, n_test, seed=int(substream(seed, "holdout").integers(2**31)))
                s = clf.margin(test.X)
                rep = partial_metrics(s[test.y == 1], s[test.y == 0])
                for name in ("auc", "op_auc", "recall_at_fpr", "accuracy", "brier"):
                    out.append(_row("alpha_sweep", seed, spec.label, spec.params, f"{name}_holdout", getattr(rep, name)))
            return out

        return (f"seed={seed},alpha={a}", run)

    rows, failures = _run_cells([cell(s, a) for s in cfg.seeds for a in alphas], threads)
    curve = {}
    for r in rows:
        if r[4] == "auc_population":
            curve.setdefault(json.loads(r[3])["alpha"], []).append(r[5])
    if curve:
        means = {a: float(np.mean(v)) for a, v in curve.items()}
        best = max(sorted(means), key=lambda a: means[a])
        rows.append(_row("alpha_sweep", -1, "alpha", {}, "argmax_alpha", best))
    return rows, failures, [("alpha_sweep.csv", lambda p: write_plot_data(curve, p))]


def _fcurve(cfg: ExperimentConfig, threads):
    pis = [float(p) for p in cfg.params.get("pi_grid", [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])]
    ts = [float(t) for t in cfg.params.get("t_grid", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0, 5.0])]
    seed = cfg.seeds[0]
    tables = {}

    def cell(spec):
        def run():
            out, table = [], []
            for p in pis:
                ex = f_exact(spec, p, np.array(ts))
                try:
                    asym = f_asymptotic(spec, p, np.array(ts))
                except UnsupportedFamilyError:
                    asym = None
                for k, t in enumerate(ts):
                    prm = {**spec.params, "pi": p, "t": t}
                    out.append(_row("fcurve", seed, spec.label, prm, "f_exact", ex[k]))
                    if asym is not None:
                        ratio = 1.0 if t == 1.0 else ex[k] / asym[k]
                        out.append(_row("fcurve", seed, spec.label, prm, "f_asymptotic", asym[k]))
                        out.append(_row("fcurve", seed, spec.label, prm, "ratio", ratio))
                        table.append([p, t, ex[k], asym[k], ratio])
                    else:
                        table.append([p, t, ex[k], "", ""])
            tables[spec.label] = (spec, table)
            return out

        return (f"loss={spec.label}", run)

    rows, failures = _run_cells([cell(sp) for sp in _losses(cfg)], threads)
    writers = [
        (f"fcurve_{_slug(spec)}.csv", lambda p, t=table: write_csv(p, ["pi", "t", "f_exact", "f_asymptotic", "ratio"], t))
        for _, (spec, table) in sorted(tables.items())
    ]
    return rows, failures, writers


def _limit_check(cfg: ExperimentConfig, threads):
    rhos = [float(r) for r in cfg.params.get("rhos", [1e-3, 1e-4, 1e-5])]
    order = int(cfg.params.get("order", 48))
    seed = cfg.seeds[0]

    def cell(rho, spec):
        def run():
            base = cfg.build_task()
            task = Task.from_rho(rho, base.minority, base.majority, spec)
            link = "linear" if spec.family is Family.SQUARE else "logistic"
            if spec.family is Family.SQUARE:
                lim = limit_square(task)
            elif spec.family is Family.ERF:
                lim = limit_erf(task)
            elif spec.family is Family.ALPHA:
                lim = limit_alpha(task, spec.alpha)
            else:
                raise ValueError(f"no limit for {spec.label}")
            tc = cfg.train.replace(optimizer="newton", link=link, seed=seed)
            clf = fit_linear(Population(task, method="quadrature", order=order), spec, tc).classifier
            prm = {**spec.params, "rho": rho}
            out = [
                _row("limit_check", seed, spec.label, prm, "angle_deg", angle_between(clf.w, lim.classifier.w)),
                _row("limit_check", seed, spec.label, prm, "b_trained", clf.b),
                _row("limit_check", seed, spec.label, prm, "b_limit", lim.classifier.b),
                _row("limit_check", seed, spec.label, prm, "b_over_log_rho", clf.b / np.log(rho)),
                _row("limit_check", seed, spec.label, prm, "limit_converged", float(lim.converged)),
            ]
            for i, (a, b) in enumerate(zip(clf.w, lim.classifier.w)):
                out.append(_row("limit_check", seed, spec.label, prm, f"w{i + 1}_ratio", a / b if b != 0 else np.nan))
            return out

        return (f"rho={rho},loss={spec.label}", run)

    rows, failures = _run_cells([cell(r, sp) for r in rhos for sp in _losses(cfg)], threads)
    rows = [r for r in rows if np.isfinite(r[5])]
    return rows, failures, []


def _contaminate(data: Samples, frac: float, seed: int) -> Samples:
    """Relabel a fraction of majority points as minority (label noise)."""
    if frac <= 0:
        return data
    maj = np.nonzero(data.y == 0)[0]
    k = int(round(frac * maj.size))
    pick = substream(seed, "contamination").choice(maj, size=k, replace=False)
    y = data.y.copy()
    y[pick] = 1
    return Samples(data.X, y)


def _c_ablation(cfg: ExperimentConfig, threads):
    task = cfg.build_task()
    alpha = float(cfg.params.get("alpha", 0.5))
    cs = [float(c) for c in cfg.params.get("cpens", C_GRID)]
    frac = float(cfg.params.get("contamination", 0.002))

    def cell(seed, c):
        spec = LossSpec("tbl", alpha=alpha, cpen=c)

        def run():
            data = _contaminate(_samples(cfg, task, seed), frac, seed)
            clf = fit_linear(data, spec, _train_cfg(cfg, seed)).classifier
            return [_row("c_ablation", seed, spec.label, spec.params, "auc_population", population_auc(task.minority, task.majority, clf.w))]

        return (f"seed={seed},cpen={c}", run)

    rows, failures = _run_cells([cell(s, c) for s in cfg.seeds for c in cs], threads)
    curve = {}
    for r in rows:
        curve.setdefault(json.loads(r[3])["cpen"], []).append(r[5])
    return rows, failures, [("c_ablation.csv", lambda p: write_plot_data(curve, p))]


def _influence_demo(cfg: ExperimentConfig, threads):
    dataset = cfg.params.get("dataset")
    task = None if dataset else cfg.build_task()
    counts = tuple(cfg.params.get("counts", [40, 360]))
    tables = {}

    def cell(seed, spec):
        def run():
            data = load_csv_dataset(dataset) if dataset else sample(task, seed=seed, counts=counts)
            tc = cfg.train.replace(optimizer="newton", seed=seed)
            clf = fit_linear(data, spec, tc).classifier
            margins = (2 * data.y - 1) * clf.margin(data.X)
            norms, cosines, flagged = [], [], 0
            for x, y in zip(data.X, data.y):
                rep = influence(data, clf, spec, LabeledSample(x, int(y)))
                norms.append(np.linalg.norm(rep.influence_oracle))
                if rep.cosine is not None:
                    cosines.append(rep.cosine)
                flagged += rep.flagged
            norms = np.array(norms)
            poor = margins <= np.quantile(margins, 0.1)
            tables[(seed, spec.label)] = (spec, np.column_stack([margins, norms]))
            out = [
                _row("influence_demo", seed, spec.label, spec.params, "influence_poor_mean", norms[poor].mean()),
                _row("influence_demo", seed, spec.label, spec.params, "influence_rest_mean", norms[~poor].mean()),
                _row("influence_demo", seed, spec.label, spec.params, "influence_max", norms.max()),
            ]
            if cosines:
                out.append(_row("influence_demo", seed, spec.label, spec.params, "closed_form_cosine_median", np.median(cosines)))
                out.append(_row("influence_demo", seed, spec.label, spec.params, "closed_form_flagged", flagged))
            return out

        return (f"seed={seed},loss={spec.label}", run)

    rows, failures = _run_cells([cell(s, sp) for s in cfg.seeds for sp in _losses(cfg)], threads)
    writers = [
        (f"influence_{_slug(spec)}_seed{seed}.csv", lambda p, t=tab: write_csv(p, ["margin", "influence_norm"], t.tolist()))
        for (seed, _), (spec, tab) in sorted(tables.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    ]
    return rows, failures, writers


RECIPES = {
    "boundary": _boundary,
    "alpha_sweep": _alpha_sweep,
    "fcurve": _fcurve,
    "limit_check": _limit_check,
    "c_ablation": _c_ablation,
    "influence_demo": _influence_demo,
}


def run_recipe(cfg: ExperimentConfig, out_dir, threads: int = 1) -> RecipeResult:
    os.makedirs(out_dir, exist_ok=True)
    with np.errstate(over="ignore", under="ignore"):
        rows, failures, writers = RECIPES[cfg.recipe](cfg, max(1, int(threads)))
    rows.sort(key=_sort_key)
    files = []
    path = os.path.join(out_dir, "results.csv")
    write_csv(path, RESULT_HEADER, rows)
    files.append(path)
    for name, write in writers:
        p = os.path.join(out_dir, name)
        write(p)
        files.append(p)
    if failures:
        p = os.path.join(out_dir, "failures.json")
        failures.sort(key=lambda f: f["cell"])
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(failures, indent=2, sort_keys=True) + "\n")
        files.append(p)
    meta = {
        "artifact_version": __version__,
        "recipe": cfg.recipe,
        "name": cfg.name,
        "config_hash": cfg.hash,
        "config": cfg.to_dict(),
        "n_rows": len(rows),
        "n_failures": len(failures),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    manifest = write_manifest(out_dir, files, meta)
    return RecipeResult(rows, files, failures, manifest)


def read_results(path):
    """Rows of a results.csv as tuples with typed seed and value."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(r[0], int(r[1]), r[2], r[3], r[4], float(r[5])) for r in reader]
