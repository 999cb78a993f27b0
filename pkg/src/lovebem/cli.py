"""Command line front end for the experiment harness.

Exit codes: 0 on success, 2 for configuration problems (including bad
flags, which argparse also reports as 2), 3 for numerical failures.
Heavy imports happen after --threads is applied so the thread caps reach
the linear algebra backend.
"""

import argparse
import dataclasses
import os
import sys


def _parser():
    parser = argparse.ArgumentParser(
        prog="lovebem",
        description="equivalent-current reconstruction experiments")
    parser.add_argument("--config", help="INI-style experiment configuration")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--threads", type=int,
                        help="cap BLAS/OpenMP threads for this run")
    parser.add_argument("--seed", type=int,
                        help="seed recorded for randomized utilities")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in ("reconstruct", "love-check", "interior-scan",
                 "conditioning", "cancellation"):
        commands.add_parser(name)
    assemble = commands.add_parser("assemble")
    assemble.add_argument("block", help="kernel block or system matrix name")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("thread count must be at least 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from . import harness
    from .exceptions import ConfigError, LovebemError

    try:
        cfg = (harness.ExperimentConfig.load(args.config)
               if args.config else harness.ExperimentConfig())
        if args.out is not None:
            cfg = harness.with_output(cfg, args.out)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        runners = {
            "reconstruct": harness.run_reconstruction,
            "love-check": harness.run_love_check,
            "interior-scan": harness.run_interior_scan,
            "conditioning": harness.run_conditioning_sweep,
            "cancellation": harness.run_cancellation,
        }
        if args.command == "assemble":
            harness.run_assemble(cfg, args.block)
        else:
            runners[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except LovebemError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
