"""Command-line entry point.

Subcommands: simulate, filter, solve-hjb, estimate, run-experiment, plot.
Each consumes a JSON config (and the prior stages' CSVs where applicable).

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 missing input.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import ConfigError, MissingInputError, NumericalError
from . import pipeline


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustkb",
        description="Uncertainty-robust Kalman-Bucy filtering experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the JSON experiment config")
        return p

    add("simulate", "simulate signal/observation paths -> paths.csv")
    add("filter", "run true- and estimated-parameter filters -> filters.csv")
    add("solve-hjb", "solve the penalty PDE -> lambda_t<k>.csv")
    est = add("estimate", "compute robust estimates -> estimates.csv")
    est.add_argument("--functional", action="append", default=None,
                     metavar="SLUG", help="restrict to a configured functional "
                     "(repeatable); default: all configured")
    add("run-experiment", "run the whole pipeline")
    add("plot", "regenerate SVG plots from estimates.csv")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    stage = args.command
    try:
        cfg = parse_config(args.config)
        if stage == "simulate":
            pipeline.stage_simulate(cfg)
        elif stage == "filter":
            pipeline.stage_filter(cfg)
        elif stage == "solve-hjb":
            pipeline.stage_solve(cfg)
        elif stage == "estimate":
            only = set(args.functional) if args.functional else None
            pipeline.stage_estimate(cfg, only=only)
        elif stage == "run-experiment":
            pipeline.run_experiment(cfg)
        elif stage == "plot":
            pipeline.stage_plot(cfg)
    except ConfigError as exc:
        print(f"robustkb {stage}: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"robustkb {stage}: numerical failure: {exc}", file=sys.stderr)
        return 3
    except MissingInputError as exc:
        print(f"robustkb {stage}: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
