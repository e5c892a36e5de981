"""Command-line entry point.

    socfedcs run --config cfg.json [--selector s ...] [--seeds 1,2,3]
                 [--set key=value ...] [--out dir]
    socfedcs compare --config cfg.json --selectors s1,s2[,...]
                 [--seeds ...] [--scenarios 1,2] [--set ...] [--out dir]

Exit codes: 0 success, 2 configuration error, 3 runtime invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .scheduler import InvariantViolation

EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socfedcs",
        description="Round-based simulator for multi-tier federated-learning "
                    "client selection")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one or more selectors")
    run_p.add_argument("--config", help="JSON config file (defaults apply)")
    run_p.add_argument("--selector", action="append", default=None,
                       choices=harness.SELECTORS,
                       help="selector to run (repeatable)")
    run_p.add_argument("--seeds", type=_int_list, default=None,
                       help="comma-separated seed list")
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override")
    run_p.add_argument("--out", default=None, help="output directory")

    cmp_p = sub.add_parser("compare", help="summary table across selectors")
    cmp_p.add_argument("--config", help="JSON config file (defaults apply)")
    cmp_p.add_argument("--selectors", type=lambda s: s.split(","),
                       required=True)
    cmp_p.add_argument("--seeds", type=_int_list, default=None)
    cmp_p.add_argument("--scenarios", type=_int_list, default=None,
                       help="data scenarios to evaluate (needs training)")
    cmp_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted config override")
    cmp_p.add_argument("--out", default=None, help="output directory")
    return parser


def _load(args) -> dict:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    doc = harness.apply_set_overrides(doc, args.overrides)
    return harness.make_config(doc)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        out = harness.output_dir(args.out)
        if args.command == "run":
            doc = harness.run(cfg, out, selectors=args.selector,
                              seeds=args.seeds)
            for run in doc["runs"]:
                print(f"{run['selector']} seed={run['seed']}: "
                      f"time_avg_cost={run['time_avg_cost']} "
                      f"final_accuracy={run['final_accuracy']}")
        else:
            rows = harness.compare(cfg, args.selectors, out, seeds=args.seeds,
                                   scenarios=args.scenarios)
            print(harness.render_table(
                rows, ["selector", "cost_mean", "cost_std", "acc_s1_mean",
                       "acc_s1_std", "acc_s2_mean", "acc_s2_std"]), end="")
        print(f"outputs written to {out}")
    except (harness.ConfigError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
