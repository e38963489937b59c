"""Command-line experiment runner.

Subcommands mirror the studies: train-teacher, distill, observation1,
observation2, sweep, curve-uncertainty. Each reads a key=value config file
(defaults fill everything else), runs every configured seed, and writes
`<out>/<experiment-id>.csv` plus a rendered PNG figure. Exit codes: 0 ok,
2 configuration problem, 3 missing artifact, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiments
from .config import default_config, load_config
from .errors import ArtifactError, ConfigError, DataError, NumericError, ParseError, ShapeError
from .figures import render_for_command
from .results import rows_to_json, write_results

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ARTIFACT = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xcl",
        description="Distillation experiments with extended transfer-sets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, extra=None):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="key=value config file")
        cmd.add_argument("--seed", type=int, help="override the config seed list")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--json", action="store_true",
                         help="also print result rows as a JSON array")
        cmd.add_argument("--append", action="store_true",
                         help="append rows to an existing result file")
        if extra:
            extra(cmd)
        return cmd

    add("train-teacher", "train the teacher on split A and save the model file")
    add("distill", "train a student against a saved teacher")
    add("observation1", "entropy-split transfer-set study")
    add("observation2", "zero-teacher-accuracy transfer-set study")
    add("sweep", "axis sweeps over temperature, smoothing, size, imbalance, sampler",
        extra=lambda cmd: cmd.add_argument(
            "--axis", required=True, choices=experiments.SWEEP_AXES))
    add("curve-uncertainty", "predicted sigma versus mixing coefficient")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else default_config()
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    return cfg


RUNNERS = {
    "train-teacher": experiments.run_train_teacher,
    "distill": experiments.run_distill,
    "observation1": experiments.run_observation1,
    "observation2": experiments.run_observation2,
    "curve-uncertainty": experiments.run_curve_uncertainty,
}


def run_command(args) -> int:
    cfg = _resolve_config(args)
    if args.command == "sweep":
        rows = experiments.run_sweep(cfg, args.axis)
        default_id = f"sweep-{args.axis}"
    else:
        rows = RUNNERS[args.command](cfg)
        default_id = args.command
    experiment_id = cfg["experiment.id"] or default_id
    out_dir = cfg["out"]
    csv_path = os.path.join(out_dir, f"{experiment_id}.csv")
    write_results(rows, csv_path, append=args.append)
    if cfg["figures"]:
        render_for_command(args.command, rows,
                           os.path.join(out_dir, f"{experiment_id}.png"))
    if args.json:
        print(rows_to_json(rows))
    else:
        print(f"wrote {len(rows)} rows to {csv_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run_command(args)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParseError, DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
