"""Command-line entry point: ``togglectl simulate|curves|summarize|presets``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, list_presets, resolve_config
from .equilibria import ConvergenceError, CurveBuildError
from .experiment import gen_curves, parse_grid_spec, run_experiment, summarize
from .integrate import IntegrationError
from .population import SimulationError
from .ssa import SSAError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (SimulationError, IntegrationError, SSAError, ConvergenceError,
                    CurveBuildError, FloatingPointError)


def _global_flags() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
    g.add_argument("--out", default=None, help="output directory (simulate) or file (curves)")
    g.add_argument("--force", action="store_true", help="overwrite existing outputs")
    g.add_argument("-v", "--verbose", action="store_true")
    return g


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags()
    ap = argparse.ArgumentParser(prog="togglectl", parents=[g],
                                 description="Toggle-switch control experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[g], help="run a config file or preset")
    sim.add_argument("config", help="path to a config file, or a preset name")

    cur = sub.add_parser("curves", parents=[g], help="build the equilibrium-curve database")
    cur.add_argument("--grid-spec", default=None,
                     help="amplitude pairs 'ATC:IPTG;ATC:IPTG...' (default: the 60-pair grid)")

    summ = sub.add_parser("summarize", parents=[g], help="metrics of an output directory")
    summ.add_argument("dir")
    summ.add_argument("--window", type=float, default=24.0, help="trailing window in hours")

    pre = sub.add_parser("presets", parents=[g], help="bundled experiment presets")
    pre.add_argument("action", choices=["list"])
    return ap


def _simulate(args) -> int:
    cfg = resolve_config(args.config)
    out = run_experiment(cfg, args.out, seed=args.seed, force=args.force)
    print(out)
    return EXIT_OK


def _curves(args) -> int:
    amps = parse_grid_spec(args.grid_spec) if args.grid_spec else None
    if args.out is None:
        sys.stdout.write(gen_curves(amps))
        return EXIT_OK
    path = Path(args.out)
    if path.exists() and not args.force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    gen_curves(amps, path=path)
    print(path)
    return EXIT_OK


def _summarize(args) -> int:
    m = summarize(args.dir, args.window)
    sys.stdout.write(m.to_csv())
    return EXIT_OK


def _presets(args) -> int:
    for name in list_presets():
        print(name)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": _simulate, "curves": _curves, "summarize": _summarize,
               "presets": _presets}[args.command]
    try:
        return handler(args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, KeyError, FileNotFoundError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
