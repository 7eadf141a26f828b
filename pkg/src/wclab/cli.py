"""Command-line front end: run, validate, and summarize experiment bundles."""

from __future__ import annotations

import argparse
import sys

from .emulation import MODES
from .errors import ConfigError, WclabError
from .experiments import config_echo_yaml, load_config, run_experiment, write_summary


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wclab",
        description="Deterministic wireless-cable link and sensing experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config and write its output bundle")
    run_p.add_argument("config", help="path to a YAML experiment config")
    run_p.add_argument(
        "--seed", type=int, default=None, help="replace the config's seed list with this one seed"
    )
    run_p.add_argument("--out", default=None, help="override the bundle output directory")
    run_p.add_argument(
        "--mode",
        choices=list(MODES),
        default=None,
        help="restrict drone-scenario output to one emulation mode",
    )
    run_p.add_argument("--quiet", action="store_true", help="suppress progress output")

    val_p = sub.add_parser("validate", help="validate a config and echo it with defaults filled in")
    val_p.add_argument("config", help="path to a YAML experiment config")
    val_p.add_argument("--quiet", action="store_true", help="suppress the echo; exit code only")

    sum_p = sub.add_parser("summarize", help="rebuild summary.csv/summary.txt for a bundle")
    sum_p.add_argument("bundle_dir", help="path to a bundle written by `wclab run`")
    sum_p.add_argument("--quiet", action="store_true", help="do not print the text table")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            if not args.quiet:
                print(config_echo_yaml(cfg), end="")
        elif args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seeds = [args.seed]
            if args.out is not None:
                cfg.output_dir = args.out
            if args.mode is not None:
                cfg.modes = [args.mode]
            bundle = run_experiment(cfg, quiet=args.quiet)
            if not args.quiet:
                print(f"bundle written to {bundle}")
        else:
            write_summary(args.bundle_dir, quiet=args.quiet)
    except ConfigError as e:
        print(f"wclab: config error: {e}", file=sys.stderr)
        return 2
    except WclabError as e:
        print(f"wclab: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
