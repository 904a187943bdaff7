"""Experiment driver: random targets, multi-seed runs, CSV/JSON/QASM artefacts."""
import dataclasses
import glob
import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.circuit import (
    DEFAULT_GATESET,
    GateKind,
    SolutionMatrix,
    ensure_valid,
    random_column,
    solution_from_json,
    solution_to_json,
)
from src.compactor import compact
from src.config import EAConfig, InitMode, Variant
from src.errors import ConfigurationError
from src.evolution import GenerationRecord, Problem, best_individual, run_evolution
from src.simulator import Statevector, simulate

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "generation",
    "best_fitness",
    "mean_fitness",
    "best_fidelity",
    "best_depth",
    "depth_reduction_pct",
]

DEPTH_METRIC_NOTE = (
    "depth is the genome column count after compaction; identity cells occupy "
    "time steps, so reductions can read lower than a transpiler-reported depth"
)

TARGET_CIRCUIT_FILE = "target.json"
TARGET_STATE_FILE = "target_state.npy"
TARGET_META_FILE = "target_meta.json"
TARGET_QASM_FILE = "target.qasm"


# ---------------------------------------------------------------------------
# OpenQASM export
# ---------------------------------------------------------------------------

_QASM_NAMES = {GateKind.X: "x", GateKind.SX: "sx", GateKind.H: "h"}


def to_qasm(matrix: SolutionMatrix) -> str:
    """OpenQASM 2.0 text, columns left to right.

    ID cells are skipped unless the whole column is identity, in which case
    every qubit gets an ``id`` so the layer stays visible.
    """
    ensure_valid(matrix)
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{matrix.num_qubits}];"]
    for column in matrix.columns:
        if all(cell.is_identity for cell in column):
            lines.extend(f"id q[{q}];" for q in range(matrix.num_qubits))
            continue
        for q, cell in enumerate(column):
            if cell.kind is GateKind.RZ:
                lines.append(f"rz({cell.theta!r}) q[{q}];")
            elif cell.kind is GateKind.CX_CONTROL:
                lines.append(f"cx q[{q}],q[{cell.partner}];")
            elif cell.kind in _QASM_NAMES:
                lines.append(f"{_QASM_NAMES[cell.kind]} q[{q}];")
    return "\n".join(lines) + "\n"


def export_qasm(matrix: SolutionMatrix, path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(to_qasm(matrix))
    return path


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

def generate_target(
    num_qubits: int,
    depth: int,
    seed: int,
    out_dir: Optional[str] = None,
    gateset: Sequence[str] = DEFAULT_GATESET,
) -> Tuple[SolutionMatrix, Statevector]:
    """Random circuit of exactly ``depth`` layers whose depth compaction cannot lower.

    Columns are drawn one at a time with ``random_column`` and a column is kept
    only if the grown circuit still compacts to its full depth. Kept cells are
    never moved, so the target has the gate density of an ordinary random
    solution while the depth it reports is one compaction cannot beat.
    """
    if depth < 2:
        raise ConfigurationError(f"target depth must be >= 2, got {depth}")
    rng = np.random.default_rng(seed)
    columns = []

    attempts = 0
    while len(columns) < depth:
        attempts += 1
        if attempts > 100 * depth:
            raise ConfigurationError(
                f"could not build a compact depth-{depth} circuit from gate set {list(gateset)}"
            )
        column = random_column(num_qubits, gateset, rng)
        if all(cell.is_identity for cell in column):
            continue
        candidate = SolutionMatrix(num_qubits, columns + [column])
        if compact(candidate).depth == candidate.depth:
            columns = candidate.columns

    circuit = ensure_valid(SolutionMatrix(num_qubits, columns))
    state = simulate(circuit)
    if out_dir:
        save_target(circuit, state, out_dir, {"num_qubits": num_qubits, "depth": depth, "seed": seed})
    return circuit, state


def save_target(circuit: SolutionMatrix, state: Statevector, out_dir: str, meta: Dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, TARGET_CIRCUIT_FILE), "w", encoding="utf-8") as f:
        f.write(solution_to_json(circuit, indent=2))
    np.save(os.path.join(out_dir, TARGET_STATE_FILE), state.amplitudes)
    with open(os.path.join(out_dir, TARGET_META_FILE), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2)
    export_qasm(circuit, os.path.join(out_dir, TARGET_QASM_FILE))
    logger.info(f"Saved {circuit.num_qubits}-qubit depth-{circuit.depth} target to {out_dir}")


def load_target(target_dir: str) -> Tuple[SolutionMatrix, Statevector]:
    if not os.path.isdir(target_dir):
        raise ConfigurationError(f"The provided path is not a valid directory: {target_dir}")
    with open(os.path.join(target_dir, TARGET_CIRCUIT_FILE), encoding="utf-8") as f:
        circuit = ensure_valid(solution_from_json(f.read()))
    state_path = os.path.join(target_dir, TARGET_STATE_FILE)
    if not os.path.isfile(state_path):
        return circuit, simulate(circuit)

    try:
        state = Statevector.from_amplitudes(np.load(state_path))
    except ValueError as e:
        raise ConfigurationError(f"Unreadable target state {state_path}: {e}") from e
    if state.num_qubits != circuit.num_qubits:
        raise ConfigurationError(
            f"target state has {state.num_qubits} qubits, target circuit {circuit.num_qubits}"
        )
    if not state.is_normalized():
        raise ConfigurationError(f"target state in {state_path} has norm {state.norm():.12g}")
    return circuit, state


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    num_qubits: int
    target_depth: int
    seeds: List[int]
    output_dir: str
    config: EAConfig = field(default_factory=EAConfig)
    target_dir: Optional[str] = None
    # only used when the target is generated on the fly
    target_seed: int = 0
    threads: int = 1
    # circuit and state already read from target_dir
    target: Optional[Tuple[SolutionMatrix, Statevector]] = field(default=None, repr=False, compare=False)

    @property
    def mode(self) -> InitMode:
        return self.config.init_mode

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def validate(self) -> "ExperimentSpec":
        if self.target_depth < 2:
            raise ConfigurationError(f"target depth must be >= 2, got {self.target_depth}")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        self.config.validate()
        return self

    @classmethod
    def from_target_dir(cls, target_dir: str, seeds: Sequence[int], output_dir: str,
                        config: EAConfig, threads: int = 1) -> "ExperimentSpec":
        circuit, state = load_target(target_dir)
        return cls(
            num_qubits=circuit.num_qubits,
            target_depth=circuit.depth,
            seeds=list(seeds),
            output_dir=output_dir,
            config=config,
            target_dir=target_dir,
            threads=threads,
            target=(circuit, state),
        )


class _CsvRecordWriter:
    """Streams GenerationRecords to an open CSV file, one flushed row at a time."""

    def __init__(self, handle):
        self.handle = handle
        self.rows = 0

    def write(self, record: GenerationRecord) -> None:
        row = pd.DataFrame([dataclasses.asdict(record)], columns=CSV_COLUMNS)
        row.to_csv(self.handle, header=self.rows == 0, index=False)
        self.handle.flush()
        self.rows += 1


def _build_problem(spec: ExperimentSpec) -> Problem:
    if spec.target is not None:
        circuit, state = spec.target
    elif spec.target_dir:
        circuit, state = load_target(spec.target_dir)
    else:
        circuit, state = generate_target(
            spec.num_qubits, spec.target_depth, spec.target_seed,
            os.path.join(spec.output_dir, "target"), spec.config.gateset,
        )
    if circuit.num_qubits != spec.num_qubits or circuit.depth != spec.target_depth:
        raise ConfigurationError(
            f"target is {circuit.num_qubits} qubits x {circuit.depth} layers, "
            f"spec asks for {spec.num_qubits} x {spec.target_depth}"
        )
    return Problem(target_state=state, target_depth=circuit.depth, target_solution=circuit)


def run_seed(spec: ExperimentSpec, problem: Problem, seed: int) -> Dict:
    cfg = dataclasses.replace(spec.config, seed=seed)
    rng = np.random.default_rng(seed)
    csv_path = os.path.join(spec.output_dir, f"seed_{seed}.csv")

    logger.info(f"Seed {seed}: {cfg.variant.value}/{cfg.init_mode.value}, "
                f"{cfg.generations} generations, population {cfg.population_size}")
    started = time.perf_counter()
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = _CsvRecordWriter(f)
        population, records = run_evolution(problem, cfg, rng, on_record=writer.write)
    wall_time = time.perf_counter() - started

    best = best_individual(population)
    with open(os.path.join(spec.output_dir, f"best_seed_{seed}.json"), "w", encoding="utf-8") as f:
        f.write(solution_to_json(best.solution, indent=2))
    export_qasm(best.solution, os.path.join(spec.output_dir, f"best_seed_{seed}.qasm"))

    final = records[-1]
    logger.info(f"Seed {seed} done in {wall_time:.1f}s: fidelity {final.best_fidelity:.5f}, "
                f"depth {final.best_depth} ({final.depth_reduction_pct:.2f}% reduction)")
    return {
        "seed": seed,
        "best_fitness": final.best_fitness,
        "best_fidelity": final.best_fidelity,
        "best_depth": final.best_depth,
        "depth_reduction_pct": final.depth_reduction_pct,
        "wall_time_s": wall_time,
    }


def run_experiment(spec: ExperimentSpec) -> Dict:
    spec.validate()
    os.makedirs(spec.output_dir, exist_ok=True)
    problem = _build_problem(spec)

    with open(os.path.join(spec.output_dir, "config.json"), "w", encoding="utf-8") as f:
        json.dump(spec.config.to_dict(), f, indent=2)

    if spec.threads == 1 or len(spec.seeds) == 1:
        per_seed = [run_seed(spec, problem, s) for s in spec.seeds]
    else:
        # seeds share nothing but the read-only problem
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            per_seed = list(pool.map(lambda s: run_seed(spec, problem, s), spec.seeds))

    metrics = ("best_fidelity", "best_depth", "depth_reduction_pct", "wall_time_s")
    summary = {
        "seeds": list(spec.seeds),
        "per_seed": per_seed,
        "mean": {m: float(np.mean([row[m] for row in per_seed])) for m in metrics},
        "num_qubits": spec.num_qubits,
        "target_depth": spec.target_depth,
        "mode": spec.mode.value,
        "variant": spec.variant.value,
        "compaction_enabled": spec.config.compaction_enabled,
        "generations": spec.config.generations,
        "depth_metric": DEPTH_METRIC_NOTE,
    }
    with open(os.path.join(spec.output_dir, "summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    logger.info(f"Summary written to {os.path.join(spec.output_dir, 'summary.json')}")
    return summary


def _seed_of(path: str) -> int:
    match = re.search(r"seed_(-?\d+)\.csv$", path)
    return int(match.group(1)) if match else 0


def aggregate_runs(runs_dir: str, write: bool = True) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-generation mean and sample standard deviation of every metric across seeds.

    Writes ``mean.csv`` and ``std.csv`` next to the seed CSVs. With a single
    seed the standard deviation is undefined and left empty.
    """
    paths = sorted(glob.glob(os.path.join(runs_dir, "seed_*.csv")), key=_seed_of)
    if not paths:
        raise ConfigurationError(f"No seed_*.csv files found in {runs_dir}")
    frames = [pd.read_csv(p) for p in paths]
    stats = pd.concat(frames).groupby("generation")[CSV_COLUMNS[1:]].agg(["mean", "std"])
    mean = stats.xs("mean", axis=1, level=1).reset_index()
    std = stats.xs("std", axis=1, level=1).reset_index()
    if write:
        mean.to_csv(os.path.join(runs_dir, "mean.csv"), index=False)
        std.to_csv(os.path.join(runs_dir, "std.csv"), index=False)
        logger.info(f"Aggregated {len(paths)} seeds into mean.csv and std.csv in {runs_dir}")
    return mean, std
