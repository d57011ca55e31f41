"""Command line entry point: ``pcabo run | summarize | list-problems``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import PAPER_DE_BUDGET_SCALE, ConfigError, ExperimentConfig, run_experiment, summarize_dir, write_summary
from .problems import list_problems

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcabo", description="Compare BO and PCA-BO on multimodal test functions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--reps", type=int, help="override the number of repetitions")
    run.add_argument("--workers", type=int, help="number of worker processes")
    run.add_argument("--output", type=Path, help="override the output directory")
    run.add_argument("--paper-budget", action="store_true",
                     help=f"give the acquisition DE {PAPER_DE_BUDGET_SCALE:g} r^2 evaluations")

    summ = sub.add_parser("summarize", help="recompute summary.json from a directory of run CSVs")
    summ.add_argument("--input", required=True, type=Path)
    summ.add_argument("--reference", default="bo")
    summ.add_argument("--precision-level", type=float, default=0.05)
    summ.add_argument("--cpu-level", type=float, default=0.01)

    sub.add_parser("list-problems", help="print the available test functions")
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    data = config.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.reps is not None:
        data["repetitions"] = args.reps
    if args.workers is not None:
        data["workers"] = args.workers
    if args.output is not None:
        data["output_dir"] = str(args.output)
    if args.paper_budget:
        data["de_budget_scale"] = PAPER_DE_BUDGET_SCALE
    return ExperimentConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    if args.command == "list-problems":
        for name, structure in list_problems():
            print(f"{name}\t{structure} global structure")
        return EXIT_OK

    if args.command == "summarize":
        if not args.input.is_dir():
            print(f"error: {args.input} is not a directory", file=sys.stderr)
            return EXIT_CONFIG
        try:
            summary = summarize_dir(args.input, reference=args.reference,
                                    precision_level=args.precision_level, cpu_level=args.cpu_level)
            path = write_summary(args.input, summary)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(path)
        return EXIT_OK

    try:
        config = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = summary.get("failed_runs", [])
    print(json.dumps({"output_dir": config.output_dir, "cells": len(summary["cells"]), "failed_runs": len(failed)}))
    return EXIT_RUNTIME if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
