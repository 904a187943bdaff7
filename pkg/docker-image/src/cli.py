#!/usr/bin/env python3
"""Command line entry point.

    python -m src.cli generate-target --qubits 4 --depth 20 --seed 0 --out runs/target
    python -m src.cli evolve --target runs/target --mode scratch --variant hybrid \
        --seeds 0,1,2,3 --config src/configs/published.conf --out runs/hybrid
    python -m src.cli aggregate --runs runs/hybrid
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import find_dotenv, load_dotenv

from src.config import load_config
from src.errors import ConfigurationError, InvariantViolation
from src.harness import ExperimentSpec, aggregate_runs, generate_target, run_experiment

logger = logging.getLogger(__name__)


def parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigurationError(f"Seeds must be comma separated integers, got {text!r}") from None
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qc-evolve",
        description="Hybrid evolutionary search for shallow circuits that prepare a target state.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-target", help="create a random target circuit and its state")
    gen.add_argument("--qubits", type=int, required=True)
    gen.add_argument("--depth", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="directory for target.json / target_state.npy")

    evo = sub.add_parser("evolve", help="run one variant for one or more seeds")
    evo.add_argument("--target", required=True, help="directory written by generate-target")
    evo.add_argument("--mode", choices=["scratch", "target"])
    evo.add_argument("--variant", choices=["hybrid", "ea", "no-ea-ops", "random"])
    evo.add_argument("--seeds", default="0,1,2,3")
    evo.add_argument("--config", help="flat key = value file with EAConfig fields")
    evo.add_argument("--out", required=True)
    evo.add_argument("--no-compaction", action="store_true")
    evo.add_argument("--threads", type=int, default=1)
    evo.add_argument("--generations", type=int)
    evo.add_argument("--population-size", type=int)
    evo.add_argument("--progress", action="store_true", help="show a progress bar per seed")

    agg = sub.add_parser("aggregate", help="per-generation mean and std of the seed CSVs into mean.csv and std.csv")
    agg.add_argument("--runs", required=True)
    return parser


def _evolve(args) -> int:
    overrides = {
        "init_mode": args.mode,
        "variant": args.variant,
        "generations": args.generations,
        "population_size": args.population_size,
        "compaction_enabled": False if args.no_compaction else None,
        "show_progress": True if args.progress else None,
    }
    cfg = load_config(args.config, overrides)
    spec = ExperimentSpec.from_target_dir(
        args.target, parse_seeds(args.seeds), args.out, cfg, threads=args.threads
    )
    summary = run_experiment(spec)
    mean = summary["mean"]
    print(f"mean best fidelity {mean['best_fidelity']:.5f}, "
          f"mean depth reduction {mean['depth_reduction_pct']:.2f}%")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(find_dotenv(usecwd=True))
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    args = build_parser().parse_args(argv)

    try:
        if args.command == "generate-target":
            generate_target(args.qubits, args.depth, args.seed, args.out)
            return 0
        if args.command == "evolve":
            return _evolve(args)
        if args.command == "aggregate":
            aggregate_runs(args.runs)
            return 0
    except (ConfigurationError, InvariantViolation) as e:
        logger.error(f"Run failed: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
