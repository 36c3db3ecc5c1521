"""Command-line experiment runner.

Every subcommand reads one JSON config document; ``--seed`` and
``--out`` override the corresponding top-level fields and ``--jobs``
sets the worker count for sweeps. Exit codes: 0 success, 1 config
error, 2 runtime or numeric failure.
"""

import argparse
import json
import sys

from .experiments import EXPERIMENT_KINDS, ConfigError, resolve_config, RUNNERS
from .trainer import NonFiniteLossError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="paretohull",
        description="Train weight-space ensembles that map to Pareto fronts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        cmd = sub.add_parser(kind, help=f"run the {kind} experiment")
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument("--jobs", type=int, default=1, help="parallel worker slots")
    return parser


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return raw


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        raw["kind"] = args.command
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["out"] = args.out
        cfg = resolve_config(raw)
        summary = RUNNERS[cfg["kind"]](cfg, jobs=max(1, args.jobs))
    except (ConfigError, FileNotFoundError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except NonFiniteLossError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2

    if cfg["kind"] == "hypervolume":
        # display rounding only; summary.json keeps all 17 digits
        print(format(summary["hypervolume"], ".12g"))
        if "standard_error" in summary:
            print(f"standard_error {format(summary['standard_error'], '.3g')}")
    elif cfg["kind"] == "toy-sweep":
        print(
            f"{summary['pairs_at_95']}/{len(summary['pairs'])} pairs at oracle ratio >= 0.95, "
            f"median {summary['median_ratio']:.4f}"
        )
    elif cfg["kind"] == "toy-baseline":
        for row in summary["inits"]:
            print(
                f"{row['id']}: losses {[round(v, 4) for v in row['final_losses']]} "
                f"grad_norm {row['final_grad_norm']:.3e} drift {row['final_loss_drift']:.3e}"
            )
    elif cfg["kind"] == "mlp-pml":
        print(f"segment accuracy hypervolume {summary['accuracy_hypervolume']:.4f}")
        if "ls_baseline" in summary:
            print(
                f"linear-scalarization accuracy hypervolume "
                f"{summary['ls_baseline']['accuracy_hypervolume']:.4f}"
            )
    elif cfg["kind"] == "ablation-grid":
        print(f"{summary['cell_count']} cells x {len(summary['seeds'])} seeds written")
    else:
        print(f"{summary['points']} subspace points written")
    return 0


if __name__ == "__main__":
    sys.exit(main())
