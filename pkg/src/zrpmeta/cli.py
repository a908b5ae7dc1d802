"""Command line entry point: ``zrpmeta {zk,mt1,hcond,tunnel,remark}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import RUNNERS, ExperimentConfig


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zrpmeta", description="Metastability experiments for condensed zero-range processes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file mirroring ExperimentConfig")
        p.add_argument("--alpha", type=float)
        p.add_argument("--graph", help='"complete:k", "ring:k" or a graph JSON file')
        p.add_argument("--Ns", type=_ints, help="N schedule, e.g. 50,100,200")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--replicas", type=int)
        p.add_argument("--horizon-jumps", type=int, dest="horizon_jumps")
        p.add_argument("--horizon-time", type=float, dest="horizon_time")
        p.add_argument("--scales", help='"default", "m1" or a JSON mapping with "ell"/"b"')
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in ("alpha", "graph", "Ns", "seed", "out", "replicas",
                                                "horizon_jumps", "horizon_time")}
    if args.scales is not None:
        overrides["scales"] = json.loads(args.scales) if args.scales.lstrip().startswith("{") else args.scales
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    report = RUNNERS[args.command](_config(args))
    js, csv_path = report.write()
    print(f"{report.name}: wrote {js} and {csv_path}")
    for msg in report.hard_failures:
        print(f"HARD FAILURE: {msg}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
