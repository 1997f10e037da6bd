"""Experiment configuration: a single versioned JSON document.

Example::

    {
      "schema_version": 1,
      "recipe": "boundary",
      "task": {"preset": "sec23"},
      "losses": [{"family": "ce"}, {"family": "alpha", "alpha": 0.5}],
      "train": {"optimizer": "newton"},
      "seeds": [0, 1, 2],
      "params": {}
    }

``task`` is either ``{"preset": name}`` (optionally with ``pi`` / ``counts``
overrides) or an explicit ``{"pi", "minority", "majority", "counts"}``
block with mixtures given as ``{"weights", "means", "covariances"}``.
Validation errors carry the JSON path and the line it starts on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from json.decoder import scanstring
from json.scanner import NUMBER_RE

from ..gaussmix import GaussianMixture, Task
from ..losses import LossSpec
from ..train import TrainConfig

SCHEMA_VERSION = 1
RECIPES = ("boundary", "alpha_sweep", "fcurve", "limit_check", "c_ablation", "influence_demo")

PRESETS = {
    # four clusters, imbalance 1:500, 200 minority points
    "sec23": {
        "pi": 1.0 / 501.0,
        "counts": [200, 100_000],
        "minority": {
            "weights": [0.5, 0.5],
            "means": [[-2.0, 2.0], [-2.0, -2.0]],
            "covariances": [[[0.5, 0.0], [0.0, 5.0]], [[5.0, 0.0], [0.0, 0.5]]],
        },
        "majority": {
            "weights": [0.5, 0.5],
            "means": [[2.0, 2.0], [2.0, -2.0]],
            "covariances": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
        },
    },
    # one cluster per class, imbalance 1:1000, correlated minority covariance
    "fig1": {
        "pi": 1.0 / 1001.0,
        "counts": [200, 200_000],
        "minority": {"weights": [1.0], "means": [[-3.0, 0.0]], "covariances": [[[2.0, 1.5], [1.5, 2.0]]]},
        "majority": {"weights": [1.0], "means": [[0.0, 0.0]], "covariances": [[[1.0, 0.0], [0.0, 1.0]]]},
    },
}


class ConfigError(ValueError):
    """A configuration problem, located by JSON path and source line."""

    def __init__(self, message: str, path=(), line: int | None = None, source: str = "<config>"):
        self.path, self.line, self.source = tuple(path), line, source
        where = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in self.path).lstrip(".") or "<root>"
        loc = f"{source}:{line}" if line else source
        super().__init__(f"{loc}: {where}: {message}")


# ---------------------------------------------------------------------------
# line tracking: map every JSON path to the line its value starts on
# ---------------------------------------------------------------------------


def _skip_ws(text, i):
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def _index_lines(text: str) -> dict:
    lines = {}

    def walk(i, path):
        i = _skip_ws(text, i)
        lines[path] = text.count("\n", 0, i) + 1
        ch = text[i]
        if ch == "{":
            i = _skip_ws(text, i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = scanstring(text, _skip_ws(text, i) + 1)
                i = _skip_ws(text, i) + 1  # colon
                i = _skip_ws(text, walk(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i += 1
        if ch == "[":
            i = _skip_ws(text, i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = _skip_ws(text, walk(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        if ch == '"':
            return scanstring(text, i + 1)[1]
        m = NUMBER_RE.match(text, i)
        if m:
            return m.end()
        for lit in ("true", "false", "null"):
            if text.startswith(lit, i):
                return i + len(lit)
        raise ValueError(f"unexpected character at offset {i}")

    walk(0, ())
    return lines


# ---------------------------------------------------------------------------
# the config object
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    recipe: str
    task: dict
    losses: tuple
    train: TrainConfig
    seeds: tuple
    params: dict = field(default_factory=dict)
    name: str = ""

    def build_task(self, loss: LossSpec | None = None) -> Task:
        t = _resolve_task(self.task)
        return Task(
            t["pi"],
            GaussianMixture.from_dict(t["minority"]),
            GaussianMixture.from_dict(t["majority"]),
            loss,
        )

    @property
    def counts(self):
        c = _resolve_task(self.task).get("counts")
        return tuple(c) if c is not None else None

    def to_dict(self) -> dict:
        train = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.train.__dict__.items()}
        return {
            "schema_version": SCHEMA_VERSION,
            "recipe": self.recipe,
            "name": self.name,
            "task": self.task,
            "losses": [s.to_dict() for s in self.losses],
            "train": train,
            "seeds": list(self.seeds),
            "params": self.params,
        }

    def canonical(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return ExperimentConfig(self.recipe, self.task, self.losses, self.train, tuple(seeds), self.params, self.name)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _resolve_task(task: dict) -> dict:
    if "preset" in task:
        base = json.loads(json.dumps(PRESETS[task["preset"]]))
        base.update({k: v for k, v in task.items() if k != "preset"})
        return base
    return task


def _validate(raw, lines, source) -> ExperimentConfig:
    def fail(msg, *path):
        # report the deepest path that exists in the source
        p = tuple(path)
        while p and p not in lines:
            p = p[:-1]
        raise ConfigError(msg, path, lines.get(p), source)

    if not isinstance(raw, dict):
        fail("top level must be an object")
    known = {"schema_version", "recipe", "name", "task", "losses", "train", "seeds", "params"}
    for key in raw:
        if key not in known:
            fail(f"unknown field {key!r}", key)
    if raw.get("schema_version") != SCHEMA_VERSION:
        fail(f"schema_version must be {SCHEMA_VERSION}", "schema_version")
    recipe = raw.get("recipe")
    if recipe not in RECIPES:
        fail(f"recipe must be one of {', '.join(RECIPES)}", "recipe")

    task = raw.get("task", {"preset": "sec23"})
    if not isinstance(task, dict):
        fail("task must be an object", "task")
    if "preset" in task and task["preset"] not in PRESETS:
        fail(f"unknown preset {task['preset']!r}; known: {', '.join(PRESETS)}", "task", "preset")
    resolved = _resolve_task(task)
    for key in ("pi", "minority", "majority"):
        if key not in resolved:
            fail(f"missing {key!r}", "task")
    if not isinstance(resolved["pi"], (int, float)) or not 0 < resolved["pi"] <= 0.5:
        fail("pi must lie in (0, 0.5]", "task", "pi")
    for side in ("minority", "majority"):
        try:
            GaussianMixture.from_dict(resolved[side])
        except (ValueError, KeyError, TypeError) as exc:
            fail(f"invalid mixture: {exc}", "task", side)
    counts = resolved.get("counts")
    if counts is not None and (
        not isinstance(counts, list) or len(counts) != 2 or any(not isinstance(c, int) or c < 1 for c in counts)
    ):
        fail("counts must be [n_minority, n_majority] with positive integers", "task", "counts")

    losses = []
    for k, d in enumerate(raw.get("losses", [])):
        if not isinstance(d, dict):
            fail("each loss must be an object", "losses", k)
        try:
            losses.append(LossSpec.from_dict(d))
        except (ValueError, TypeError) as exc:
            bad = next((f for f in ("gamma", "epsilon", "delta1", "alpha", "cpen") if f in str(exc)), "family")
            fail(str(exc), "losses", k, bad)

    train = raw.get("train", {})
    if not isinstance(train, dict):
        fail("train must be an object", "train")
    fields = set(TrainConfig.__dataclass_fields__)
    for key in train:
        if key not in fields:
            fail(f"unknown training field {key!r}", "train", key)
    try:
        tr = dict(train)
        if tr.get("init_w") is not None:
            tr["init_w"] = tuple(tr["init_w"])
        train_cfg = TrainConfig(**tr)
    except (ValueError, TypeError) as exc:
        fail(str(exc), "train")
    if train_cfg.link == "linear":
        for k, spec in enumerate(losses):
            if spec.family.value != "square":
                fail("the linear link is only defined for the square loss", "losses", k, "family")

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        fail("seeds must be a nonempty list", "seeds")
    for k, s in enumerate(seeds):
        if not isinstance(s, int) or isinstance(s, bool) or s < 0:
            fail("seeds must be non-negative integers", "seeds", k)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        fail("params must be an object", "params")
    return ExperimentConfig(recipe, task, tuple(losses), train_cfg, tuple(seeds), params, str(raw.get("name", "")))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", (), exc.lineno, source) from exc
    return _validate(raw, _index_lines(text), source)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", (), None, str(path)) from exc
    return parse_config(text, str(path))


def config_from_dict(d: dict) -> ExperimentConfig:
    return parse_config(json.dumps(d, indent=1))
