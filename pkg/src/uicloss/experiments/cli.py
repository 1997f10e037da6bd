"""Command line entry point.

    uicloss boundary --out runs/fig3 --threads 4
    uicloss alpha-sweep --config sweep.json --out runs/fig2
    uicloss losses eval --family alpha --alpha 0.5 --y 1 --etahat 0.3

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..losses import DomainError, LossSpec, loss_grad, loss_hess, loss_value
from .config import ConfigError, config_from_dict, load_config
from .recipes import run_recipe

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SUBCOMMANDS = {
    "boundary": "boundary",
    "alpha-sweep": "alpha_sweep",
    "fcurve": "fcurve",
    "limit-check": "limit_check",
    "c-ablation": "c_ablation",
    "influence": "influence_demo",
}

# configs used when --config is not given
DEFAULT_CONFIGS = {
    "boundary": {"task": {"preset": "sec23"}, "train": {"optimizer": "newton"}, "seeds": [0]},
    "alpha_sweep": {"task": {"preset": "sec23"}, "train": {"optimizer": "newton"}, "seeds": [0, 1, 2]},
    "fcurve": {"seeds": [0]},
    "limit_check": {"task": {"preset": "sec23"}, "seeds": [0]},
    "c_ablation": {"task": {"preset": "sec23"}, "train": {"optimizer": "newton"}, "seeds": [0, 1, 2]},
    "influence_demo": {"task": {"preset": "fig1"}, "train": {"optimizer": "newton"}, "seeds": [0]},
}


def _common(p):
    p.add_argument("--config", help="JSON experiment config (defaults to the recipe's preset)")
    p.add_argument("--out", default="runs", help="output directory (default: runs/<recipe>)")
    p.add_argument("--seed", type=int, help="run only this seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent cells")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uicloss", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _common(sub.add_parser(name, help=f"run the {SUBCOMMANDS[name]} recipe"))
    losses = sub.add_parser("losses", help="loss utilities")
    lsub = losses.add_subparsers(dest="action", required=True)
    ev = lsub.add_parser("eval", help="value and derivatives of a loss at (y, etahat)")
    ev.add_argument("--family", required=True)
    for hp in ("gamma", "epsilon", "delta1", "alpha", "cpen"):
        ev.add_argument(f"--{hp}", type=float)
    ev.add_argument("--y", type=int, required=True, choices=(0, 1))
    ev.add_argument("--etahat", type=float, required=True, nargs="+")
    ev.add_argument("--quiet", action="store_true")
    return parser


def _losses_eval(args) -> int:
    hp = {k: getattr(args, k) for k in ("gamma", "epsilon", "delta1", "alpha", "cpen") if getattr(args, k) is not None}
    try:
        spec = LossSpec(args.family, **hp)
        rows = [
            {"etahat": e, "value": float(loss_value(spec, args.y, e)), "grad": float(loss_grad(spec, args.y, e)), "hess": float(loss_hess(spec, args.y, e))}
            for e in args.etahat
        ]
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(json.dumps({"loss": spec.to_dict(), "y": args.y, "results": rows}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "losses":
        return _losses_eval(args)
    recipe = SUBCOMMANDS[args.command]
    try:
        if args.config:
            cfg = load_config(args.config)
            if cfg.recipe != recipe:
                raise ConfigError(f"config is for recipe {cfg.recipe!r}, not {recipe!r}", ("recipe",), None, args.config)
        else:
            cfg = config_from_dict({"schema_version": 1, "recipe": recipe, **DEFAULT_CONFIGS[recipe]})
        if args.seed is not None:
            cfg = cfg.with_seeds([args.seed])
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.config or args.out != "runs" else f"runs/{recipe}"
    result = run_recipe(cfg, out, threads=args.threads)
    if result.failures:
        for f in result.failures:
            print(f"numerical failure in {f['cell']}: {f['error']}: {f['message']}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print(f"{recipe}: {len(result.rows)} rows, {len(result.files)} files -> {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
