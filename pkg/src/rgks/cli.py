"""Command-line interface: run, compare, inspect-checkpoint."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import parse_config
from .errors import ConfigError
from .fileio import read_checkpoint
from .report import markdown_table
from .runner import compare, run


def _setup_logging(verbosity: str):
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(verbosity, logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    config = parse_config(args.config)
    _setup_logging(config.output.verbosity)
    return run(config)


def cmd_compare(args) -> int:
    configs = [parse_config(p) for p in args.configs]
    _setup_logging(configs[0].output.verbosity)
    rows = compare(configs, Path(args.out))
    sys.stdout.write(markdown_table(rows))
    return 0


def cmd_inspect_checkpoint(args) -> int:
    V, x, lam = read_checkpoint(args.file)
    ortho = float(np.linalg.norm(V.T @ V - np.eye(V.shape[1])))
    contained = float(np.linalg.norm(x - V @ (V.T @ x)) / max(np.linalg.norm(x), 1e-300))
    print(f"file:            {args.file}")
    print(f"n (unknowns):    {V.shape[0]}")
    print(f"k (basis width): {V.shape[1]}")
    print(f"lambda:          {lam!r}")
    print(f"||x||:           {float(np.linalg.norm(x))!r}")
    print(f"||V'V - I||_F:   {ortho:.3e}")
    print(f"iterate out-of-span fraction: {contained:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgks",
        description="Bounded-memory generalized Krylov solvers for regularized inverse problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configuration file")
    p_run.add_argument("config", help="TOML run configuration")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs and tabulate final quality")
    p_cmp.add_argument("configs", nargs="+", help="two or more TOML run configurations")
    p_cmp.add_argument("--out", default="rgks-compare", help="directory for the comparison summary")
    p_cmp.set_defaults(func=cmd_compare)

    p_ins = sub.add_parser("inspect-checkpoint", help="describe a basis checkpoint file")
    p_ins.add_argument("file")
    p_ins.set_defaults(func=cmd_inspect_checkpoint)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
