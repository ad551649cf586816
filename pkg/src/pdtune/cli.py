"""Command-line interface.

Subcommands reproduce the three studies (population-size sweep,
generic-vs-specific controllers, trajectory-speed study), tune single
trajectories, and emit the rollout dataset. Exit codes: 0 success,
2 configuration/usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from . import experiments


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdtune",
        description="Tune joint-space PD torque controllers for a simulated "
                    "planar arm with a two-objective genetic algorithm.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="YAML config file (defaults are built in)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config base seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel rollout evaluations per generation")
        p.add_argument("--overwrite", action="store_true",
                       help="replace existing output files")

    p_tune = sub.add_parser("tune", help="tune gains for one trajectory")
    p_tune.add_argument("trajectory", help="trajectory id from the config")
    common(p_tune)

    common(sub.add_parser("popsweep", help="population-size study"))
    common(sub.add_parser("generic-vs-specific",
                          help="generic controller vs per-trajectory controller"))
    common(sub.add_parser("speed-study", help="trajectory-duration study"))
    common(sub.add_parser("emit-dataset",
                          help="write the torque/position/velocity dataset"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and args.command != "tune":
            # replicated commands derive run seeds from the base seed
            from dataclasses import replace
            cfg = replace(cfg, base_seed=args.seed)
        if args.command == "tune":
            experiments.run_tune(cfg, args.trajectory, args.out, seed=args.seed,
                                 jobs=args.jobs, overwrite=args.overwrite)
        elif args.command == "popsweep":
            experiments.run_popsweep(cfg, args.out, jobs=args.jobs,
                                     overwrite=args.overwrite)
        elif args.command == "generic-vs-specific":
            experiments.run_generic_vs_specific(cfg, args.out, jobs=args.jobs,
                                                overwrite=args.overwrite)
        elif args.command == "speed-study":
            experiments.run_speed_study(cfg, args.out, jobs=args.jobs,
                                        overwrite=args.overwrite)
        elif args.command == "emit-dataset":
            experiments.run_emit_dataset(cfg, args.out, jobs=args.jobs,
                                         overwrite=args.overwrite)
    except ConfigError as err:
        print(f"pdtune: config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"pdtune: {err}", file=sys.stderr)
        return 2 if args.config is not None and str(args.config) in str(err) else 1
    except Exception as err:  # runtime failures map to exit code 1
        print(f"pdtune: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
