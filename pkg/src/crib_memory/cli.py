"""Command line entry point: ``crib-memory {run,sweep,analytic,validate}``.

Exit codes: 0 success, 1 invalid configuration or failed validation,
2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunSpec, parse_config
from .errors import ConfigError, NumericalError, ProtocolError
from .protocol import cmd_analytic, cmd_run, cmd_sweep, dumps_summary
from .validation import report, run_validation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _floats(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _load(args) -> RunSpec:
    spec = parse_config(args.config) if args.config else RunSpec()
    if args.seed is not None:
        spec = spec.updated(noise={"seed": args.seed})
    return spec


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run description (defaults if omitted)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (overrides [noise] seed)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")

    parser = argparse.ArgumentParser(prog="crib-memory",
                                     description="CRIB quantum memory for polarization qubits in V-type media")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one protocol run: summary.json and stage grids")
    sw = sub.add_parser("sweep", parents=[common], help="efficiency over optical depth x k3")
    sw.add_argument("--depths", type=_floats, default=[0.5 * i for i in range(1, 21)],
                    help="comma-separated optical depths (default 0.5..10)")
    sw.add_argument("--k3", type=_floats, default=[0.0, 1.0, 5.0, 20.0],
                    help="comma-separated ground-level noise widths (default 0,1,5,20)")
    sub.add_parser("analytic", parents=[common], help="closed-form tables, no simulation")
    va = sub.add_parser("validate", parents=[common], help="acceptance suite with pass/fail report")
    va.add_argument("--criteria", type=lambda s: [int(x) for x in s.split(",")],
                    help="comma-separated criterion ids (default: all)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _load(args)
        out = args.out or spec.output.directory
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "run":
            summary = cmd_run(spec, out, args.threads)
            sys.stdout.write(dumps_summary(summary["efficiency"]))
        elif args.command == "sweep":
            rows = cmd_sweep(spec, args.depths, args.k3, out, args.threads)
            print(f"wrote {len(rows)} rows to {os.path.join(out, 'sweep.csv')}")
        elif args.command == "analytic":
            for name in cmd_analytic(spec, out):
                print(os.path.join(out, name))
        else:
            checks = run_validation(spec, args.threads, args.criteria)
            for c in checks:
                print(c.line())
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "validation.json"), "w", encoding="utf-8") as fh:
                json.dump(report(checks), fh, indent=2, sort_keys=True)
                fh.write("\n")
            return EXIT_OK if all(c.passed for c in checks) else EXIT_CONFIG
    except (ConfigError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
