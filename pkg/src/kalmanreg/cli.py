"""Command-line entry point: ``kalmanreg run|validate|curves``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, validate_config
from .curve import SCALARIZERS, build_curve, write_curve_csv
from .experiment import PipelineError, metrics_markdown, run_experiment
from .sgd import read_trajectory_csv

EXIT_OK, EXIT_INVALID, EXIT_PIPELINE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kalmanreg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config end to end")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output_dir in the config)")
    run.add_argument("--parallel", type=int, default=1, help="worker processes for candidate training")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)

    cur = sub.add_parser("curves", help="re-emit weight-vs-loss plot data from a trajectory CSV")
    cur.add_argument("--from", dest="source", required=True)
    cur.add_argument("--out", required=True)
    cur.add_argument("--scalarize", choices=SCALARIZERS, default="norm")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "curves":
        try:
            traj = read_trajectory_csv(args.source)
            write_curve_csv(build_curve(traj, args.source, args.scalarize), args.out)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    try:
        config = validate_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(f"ok: {args.config} ({len(config.candidates)} candidates, digest {config.digest[:12]})")
        return EXIT_OK

    if args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    out = args.out or config.output_dir
    if out is None:
        print("error: no output directory; pass --out or set output_dir", file=sys.stderr)
        return EXIT_INVALID
    try:
        report = run_experiment(config, parallel=args.parallel, output_dir=out)
    except PipelineError as exc:
        where = f" (candidate {exc.candidate_id})" if exc.candidate_id else ""
        print(f"error in stage {exc.stage}{where}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    sys.stdout.write(metrics_markdown(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
