"""
Detonation Lab - numerical experiments on detonation waves

Main entry point.
Builds Majda and ZND shock profiles, runs perturbations in the shock frame,
measures weighted-energy decay and tracks characteristic blowup.

Exit codes: 0 pass, 1 experiment failure, 2 usage or config error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace

# Add the project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.errors import ConfigError, LabError
from core.experiments import (
    Experiment, accept, experiment_name, fit_decay_file, load_config, run_experiment,
)
from config import ENERGY_FLOOR_FACTOR, ENERGY_TRANSIENT_FRACTION, LOG_FORMAT, WORKERS

SUBCOMMANDS = {
    "profile": Experiment.PROFILE,
    "majda-run": Experiment.MAJDA_STABILITY,
    "char-diag": Experiment.CHAR_DIAG,
    "znd-blowup": Experiment.ZND_BLOWUP,
    "no-damping": Experiment.NO_DAMPING,
    "weighted-growth": Experiment.WEIGHTED_GROWTH,
}

# experiments the majda-run subcommand may be pointed at through the config file
MAJDA_VARIANTS = (Experiment.MAJDA_STABILITY, Experiment.MAJDA_DAMPING, Experiment.NEGATIVE_SPEED)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--workers", type=int, default=WORKERS, help="worker processes for sweeps")
    common.add_argument("--log-level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="logging level")

    parser = argparse.ArgumentParser(prog="detonation-lab", description="Detonation stability and blowup lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    fit = sub.add_parser("fit-decay", parents=[common], help="fit a decay rate to a majda-run CSV")
    fit.add_argument("csv", help="CSV written by majda-run")
    fit.add_argument("--column", default="energy")
    fit.add_argument("--transient-fraction", type=float, default=ENERGY_TRANSIENT_FRACTION)
    fit.add_argument("--floor-factor", type=float, default=ENERGY_FLOOR_FACTOR,
                     help="stop the fit where the column comes within this factor of its floor; 0 disables")
    sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    return parser


def print_banner(title: str):
    print("=" * 60)
    print(f"  Detonation Lab | {title}")
    print("=" * 60)


def main(argv=None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    if args.workers < 1:
        parser.error("--workers must be at least 1")

    print_banner(args.command)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)

        if args.command == "fit-decay":
            summary = fit_decay_file(args.csv, args.column, args.transient_fraction, args.out,
                                     args.floor_factor if args.floor_factor > 0 else None)
            print(f"theta_hat = {summary['theta_hat']:.6g}  (r2 = {summary['r2']:.4f})")
            return 0

        if args.command == "accept":
            passed, items = accept(cfg, args.workers)
            for item in items:
                print(f"  [{'PASS' if item.passed else 'FAIL'}] {item.id:2d} {item.name}")
            print("=" * 60)
            return 0 if passed else 1

        experiment = SUBCOMMANDS[args.command]
        if experiment is Experiment.MAJDA_STABILITY and cfg.experiment in MAJDA_VARIANTS:
            experiment = cfg.experiment
        result = run_experiment(replace(cfg, experiment=experiment), args.workers)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except LabError as e:
        print(f"{args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1

    for path in result.artifacts:
        print(f"  wrote {path}")
    print(f"  {experiment_name(result.experiment)}: {'PASS' if result.passed else 'FAIL'}")
    print("=" * 60)
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
