"""Command-line entry point: ``dfrc-hbf run`` and ``dfrc-hbf validate``."""

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .runner import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dfrc-hbf",
        description="Hybrid beamforming and radar-receiver design experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV output")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("-v", "--verbose", action="store_true")

    validate = sub.add_parser("validate", help="check a config file and exit")
    validate.add_argument("--config", required=True, help="experiment config file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        key, values = cfg.sweep
        n = len(values) * len(cfg.baselines) * cfg.trials
        print(f"ok: {cfg.scenario}, sweep {key or 'none'}, {n} solves")
        return EXIT_OK

    if args.seed is not None and args.seed < 0:
        print("config error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    result = run_experiment(cfg, out_dir=args.out, seed=args.seed, jobs=args.jobs)
    print(f"wrote {len(result.rows)} rows to {result.out_dir}")
    if result.all_infeasible:
        print("every solve was infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
