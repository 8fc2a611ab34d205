"""Command-line entry point.

Subcommands mirror the experiment drivers; every one reads a flat
key=value config and writes CSV/plain-text artifacts into --out.

Exit codes: 0 success, 2 configuration error, 3 solver failure
(Picard or Krylov breakdown), 4 step controller stuck at its floor.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import (run_acoustic, run_adaptive, run_convergence,
                     run_simulation, run_validate)
from .schedules import StepStuckError
from .stepper import KrylovBreakdownError, PicardDivergedError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_STUCK = 4

_COMMANDS = {
    "run": "time-step the configured problem and write norm/ledger series",
    "convergence": "sweep the configured step sizes and report observed orders",
    "adapt": "run the divergence-based step controller experiment",
    "acoustic": "run the linear acoustic sub-model diagnostics",
    "validate-schedule": "audit the schedule against the slow-variation bound",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acflow",
        description="incompressible flow solver with artificial compression")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in _COMMANDS.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True,
                       help="path to a key=value config file")
        p.add_argument("--out", required=True,
                       help="directory for CSV and report output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            res = run_simulation(cfg, out_dir=args.out)
            print(f"completed {res.steps} steps to t={res.t:g}; "
                  f"series in {args.out}")
        elif args.command == "convergence":
            res = run_convergence(cfg, out_dir=args.out)
            print(f"orders: direct u={res.order_u:.3f} p={res.order_p:.3f}; "
                  f"successive-difference u={res.rich_order_u:.3f} "
                  f"p={res.rich_order_p:.3f}")
        elif args.command == "adapt":
            res = run_adaptive(cfg, out_dir=args.out)
            print(f"completed {res.steps} accepted steps "
                  f"({res.n_doubled} doublings, {res.n_halved} halvings)")
        elif args.command == "acoustic":
            res = run_acoustic(cfg, out_dir=args.out)
            print(f"wave-energy drift {res.drift_W:.3e} "
                  f"(reconstructed {res.drift_W_fd:.3e})")
        else:
            res = run_validate(cfg, out_dir=args.out)
            rep = res.slow_variation
            verdict = "satisfied" if rep.satisfied else "violated"
            print(f"slow-variation bound {verdict}: max ratio "
                  f"{rep.max_ratio:.4g} vs beta {rep.beta:g}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PicardDivergedError, KrylovBreakdownError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StepStuckError as exc:
        print(f"step controller stuck: {exc}", file=sys.stderr)
        return EXIT_STUCK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
