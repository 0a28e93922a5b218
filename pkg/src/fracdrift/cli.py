"""Command-line interface: fracdrift run | preset | validate."""

from __future__ import annotations

import argparse
import sys

from .errors import FracdriftError
from .harness import PRESET_NAMES, execute_run, parse_config, run_preset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracdrift",
        description=(
            "Pseudo-spectral fractional diffusion transport / quasi-geostrophic "
            "solver with an inequality-verification harness."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate a configured forward run")
    run_p.add_argument("config", help="path to a flat INI run configuration")
    run_p.add_argument("--out", default=None, help="output directory override")

    pre_p = sub.add_parser("preset", help="run a named verification preset")
    pre_p.add_argument("name", choices=PRESET_NAMES)
    pre_p.add_argument("--out", default=".", help="output root (default .)")
    pre_p.add_argument("--n", type=int, default=None, help="points per axis")
    pre_p.add_argument("--alpha", type=float, default=None, help="dissipation half-order")
    pre_p.add_argument("--dt", type=float, default=None, help="time step")
    pre_p.add_argument("--velocity", default="sqg", choices=("sqg", "zero"),
                       help="velocity mode for the transfer preset")

    val_p = sub.add_parser("validate", help="parse and validate a configuration")
    val_p.add_argument("config", help="path to a flat INI run configuration")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            with open(args.config) as fh:
                parse_config(fh.read())
            print(f"{args.config}: OK")
            return 0
        if args.command == "run":
            with open(args.config) as fh:
                cfg = parse_config(fh.read())
            result = execute_run(cfg, out_dir=args.out)
            failed = [k for k, (ok, _) in result["criteria"].items() if not ok]
            for name, (ok, detail) in result["criteria"].items():
                print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            return 0 if not failed else 1
        status = run_preset(args.name, args.out, n=args.n, alpha=args.alpha,
                            dt=args.dt, velocity=args.velocity)
        summary = f"{args.out}/{args.name}/summary.txt"
        with open(summary) as fh:
            sys.stdout.write(fh.read())
        return status
    except FracdriftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
