"""``noisysq <subcommand> --config PATH [--seed N] [--out DIR]``.

Exit status: 0 on success, 2 on a configuration error, 3 when the
experiment ran but its acceptance check failed.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError
from .harness import SUBCOMMANDS, ExperimentConfig, default_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisysq", description="Noise-tolerant statistical-query experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, exp in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {exp.value} experiment")
        p.add_argument("--config", help="JSON config; fields left out take the built-in defaults")
        p.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
        p.add_argument("--out", help="directory for the JSON and CSV outputs")
    return parser


def load_config(args) -> ExperimentConfig:
    exp = SUBCOMMANDS[args.command]
    config = ExperimentConfig.load(args.config, exp) if args.config else default_config(exp)
    if args.seed is not None:
        config.seeds = [args.seed]
    if args.out:
        config.output_path = args.out
    config.validate()
    return config


def _summary(result) -> dict:
    if result.experiment == "Magnitude":
        r = result.records[0]
        return {"estimate": r["magnitude_hat"], "std_error": r["std_error"],
                "analytic_bound": r["analytic_bound"], "samples_used": r["samples_total"]}
    return {"experiment": result.experiment, "passed": result.passed, **result.aggregate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        result = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_summary(result), indent=2, sort_keys=True, default=str))
    return EXIT_OK if result.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
