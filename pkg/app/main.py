"""pybeltrami command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .commands import CommandRegistry
from .handler import execute_command

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for all subcommands."""
    parser = argparse.ArgumentParser(
        description="Invariant tori, interface jumps and piecewise Beltrami equilibria"
    )
    parser.add_argument(
        "command",
        choices=CommandRegistry.get_all_commands(),
        help="Subcommand to run",
    )
    parser.add_argument("--config", type=Path, help="Run configuration file")
    parser.add_argument("--out", type=str, help="Output directory (default: out)")
    parser.add_argument("--grid", type=str, help="Grid size as N1xN2 (default: 32x32)")
    parser.add_argument("--tol", type=str, help="Solver tolerance")
    parser.add_argument("--seed", type=str, help="Random seed for perturbed fields")
    parser.add_argument("--max-iter", dest="max_iter", type=str, help="Iteration budget")
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the command line, run the subcommand and return its exit code."""
    args = build_parser().parse_args(argv)

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    overrides = {
        "out": args.out,
        "grid": args.grid,
        "tol": args.tol,
        "seed": args.seed,
        "max_iter": args.max_iter,
    }
    return execute_command(args.command, args.config, overrides)


if __name__ == "__main__":
    sys.exit(main())
