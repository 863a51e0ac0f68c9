"""Command-line entry point: ``hpcpg run --config FILE`` and ``hpcpg list-examples``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import LookupFailure
from .experiments import MODES, ConfigError, load_config, parse_step, run, write_outputs
from .problems import registry

EXIT_OK, EXIT_CELL_FAILED, EXIT_CONFIG = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _step_list(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    try:
        for item in items:
            parse_step(item)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpcpg", description="C1 Petrov-Galerkin time stepping experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a convergence experiment from a TOML config")
    run_p.add_argument("--config", required=True, help="path to the TOML config")
    run_p.add_argument("--example", help="override the example id")
    run_p.add_argument("--mode", choices=MODES, help="override the sweep mode")
    run_p.add_argument("--degrees", type=_int_list, metavar="R1,R2,...",
                       help="override degrees (replaces all sweep blocks)")
    run_p.add_argument("--steps", type=_step_list, metavar="K1,K2,...",
                       help="override step sizes, e.g. 1/32,1/64 (replaces all sweep blocks)")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--tol", type=float, help="fixed-point tolerance")
    run_p.add_argument("--quad-points", type=int, help="Gauss points per interval for the load")
    run_p.add_argument("--jobs", type=int, help="run cells in this many processes")

    sub.add_parser("list-examples", help="list the built-in examples")
    return parser


def _cmd_list() -> int:
    for ex in registry():
        params = ", ".join(f"{k}={v}" for k, v in ex.params.items())
        extra = f" [{params}]" if params else ""
        print(f"{ex.id:<12} T={ex.T:g} L={ex.lipschitz:.4g}{extra}  {ex.description}")
    return EXIT_OK


def _cmd_run(args) -> int:
    overrides = {
        "example": args.example, "mode": args.mode, "degrees": args.degrees,
        "steps": args.steps, "out": args.out, "tol": args.tol, "quad_points": args.quad_points,
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            cfg.jobs = args.jobs
        report = run(cfg)
    except (ConfigError, LookupFailure) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in write_outputs(report):
        print(path)
    for cell in report.failed:
        print(f"cell r={cell.r} k={cell.k:g} failed: {cell.message}", file=sys.stderr)
    return EXIT_CELL_FAILED if report.failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-examples":
        return _cmd_list()
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
