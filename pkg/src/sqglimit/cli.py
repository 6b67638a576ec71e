"""Command line front end: ``run``, ``sweep`` and ``verify``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import ConfigError, load_config, run_experiment, run_sweep
from .verify import SUITES, format_table, run_suite


def _parse_epsilons(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqglimit", description="Rotating dissipative SQG experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one trajectory")
    p.add_argument("config")
    p.add_argument("--out", help="output root (default: $SQG_OUT_DIR or ./sqg_out)")

    p = sub.add_parser("sweep", help="eps-sweep against the matching limit model")
    p.add_argument("config")
    p.add_argument("--epsilons", type=_parse_epsilons, required=True, help="comma-separated, strictly decreasing")
    p.add_argument("--regime", choices=("fixed", "combined"), default="fixed")
    p.add_argument("--alpha", type=float, default=None, help="nu = eps**alpha in the combined regime")
    p.add_argument("--jobs", type=int, default=1, help="members integrated concurrently")
    p.add_argument("--out", help="output root (default: $SQG_OUT_DIR or ./sqg_out)")

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--suite", default="all", help=f"one of {', '.join([*SUITES, 'all'])}")
    return parser


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, args.out)
    tr = result.trajectory
    print(f"status: {tr.status}")
    print(f"valid: {tr.valid} (regular={tr.regular}, boundary_ok={tr.boundary_ok})")
    print(f"energy ledger: {'PASS' if result.manifest['validity']['energy_ledger_passed'] else 'FAIL'}")
    print(f"output: {result.directory}")
    return result.exit_code


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    result = run_sweep(cfg, args.epsilons, args.regime, args.alpha, args.out, args.jobs)
    if result.report is not None:
        print(f"{'epsilon':>10} {'D':>12} {'constraint':>12}")
        for e, d, c in zip(result.report.epsilons, result.report.deviations, result.report.constraint_residuals):
            print(f"{e:>10.4g} {d:>12.4e} {c:>12.4e}")
    for tr in result.members:
        if not tr.valid:
            print(f"invalid member eps={tr.regime.epsilon:g}: {tr.status}, boundary_ok={tr.boundary_ok}")
    print(f"verdict: {'PASS' if result.verdict else 'FAIL'}")
    print(f"output: {result.directory}")
    return result.exit_code


def cmd_verify(args) -> int:
    if args.suite != "all" and args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}", file=sys.stderr)
        return 1
    checks = run_suite(args.suite)
    print(format_table(checks))
    return 0 if all(c.passed for c in checks) else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
