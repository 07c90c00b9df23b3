"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from .config import parse_config
from .errors import ConfigError, ContinuityError, ConvergenceError
from .output import COMMANDS, run_command


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwsim",
        description="Double-well spinor-lattice simulations: potentials, bands, "
        "localized-doublet dynamics, sweeps and ensemble dephasing.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI-style run configuration")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps/ensembles")
    parser.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
    parser.add_argument("--seed", type=int, default=None, help="override the ensemble seed")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        run_cfg = parse_config(args.config)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        if args.seed is not None:
            run_cfg = dataclasses.replace(
                run_cfg,
                ensemble=dataclasses.replace(run_cfg.ensemble, seed=args.seed),
            )
            run_cfg.resolved["ensemble"]["seed"] = args.seed
        bundle = run_command(args.command, run_cfg, jobs=args.jobs, out_dir=args.out)
    except ConfigError as exc:
        print(f"dwsim: config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ContinuityError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        print(f"dwsim: numerical failure: {exc}", file=sys.stderr)
        return 3
    for _, path in sorted(bundle.files.items()):
        print(path)
    print(bundle.manifest_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
