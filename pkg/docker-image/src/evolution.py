"""The evolutionary engine: fitness, crossover, mutation, selection and the generation loop."""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.circuit import (
    DEFAULT_GATESET,
    GateCell,
    GateKind,
    SolutionMatrix,
    clone_solution,
    identity_column,
    random_column,
    random_single_gate,
    random_solution,
    validate,
)
from src.compactor import compact
from src.config import EAConfig, InitMode, Variant
from src.errors import ConfigurationError, InvariantViolation
from src.simulator import Statevector, fidelity as state_fidelity, simulate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Problem:
    """What a run is solving: the target state, its depth and (for target mode) its circuit."""
    target_state: Statevector
    target_depth: int
    target_solution: Optional[SolutionMatrix] = None

    @property
    def num_qubits(self) -> int:
        return self.target_state.num_qubits


@dataclass(frozen=True)
class FitnessBreakdown:
    F: float
    delta_norm: float
    A: float
    B: float
    total: float


@dataclass
class Individual:
    solution: SolutionMatrix
    state: Statevector
    fidelity: float
    depth: int
    fitness: float
    breakdown: FitnessBreakdown
    history: Tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_fidelity: float
    best_depth: int
    depth_reduction_pct: float


class MutationKind(str, Enum):
    MUTATE_GATE = "MutateGate"
    GATE_SWAP = "GateSwap"
    COLUMN_SWAP = "ColumnSwap"
    SWAP_CTRL_TARG = "SwapCtrlTarg"
    ADD_RANDOM_COLUMN = "AddRandomColumn"
    DELETE_COLUMN = "DeleteColumn"
    ADD_CX = "AddCX"
    ADD_SINGLE_GATE = "AddSingleGate"


MUTATION_KINDS = tuple(MutationKind)


# ---------------------------------------------------------------------------
# Fitness
# ---------------------------------------------------------------------------

def normalized_depth(depth: int, target_depth: int) -> float:
    if target_depth <= 1:
        raise ConfigurationError(f"target depth must be > 1, got {target_depth}")
    if depth < 1:
        raise ConfigurationError(f"depth must be >= 1, got {depth}")
    # not clamped: deeper-than-target circuits are penalised proportionally
    return (depth - 1) / (target_depth - 1)


def fitness(F: float, depth: int, target_depth: int, alpha: float, beta: float) -> FitnessBreakdown:
    delta_norm = normalized_depth(depth, target_depth)
    return FitnessBreakdown(
        F=F,
        delta_norm=delta_norm,
        A=1.0 - delta_norm,
        B=1.0 - F,
        total=alpha * F - beta * delta_norm,
    )


def evaluate(
    solution: SolutionMatrix,
    problem: Problem,
    cfg: EAConfig,
    history: Sequence[str] = (),
) -> Individual:
    state = simulate(solution)
    F = state_fidelity(state, problem.target_state)
    breakdown = fitness(F, solution.depth, problem.target_depth, cfg.alpha, cfg.beta)
    return Individual(
        solution=solution,
        state=state,
        fidelity=F,
        depth=solution.depth,
        fitness=breakdown.total,
        breakdown=breakdown,
        history=tuple(history),
    )


# ---------------------------------------------------------------------------
# Crossover
# ---------------------------------------------------------------------------

def single_point_crossover(
    p1: SolutionMatrix, p2: SolutionMatrix, rng: np.random.Generator
) -> SolutionMatrix:
    if p1.num_qubits != p2.num_qubits:
        raise ConfigurationError("parents act on different qubit counts")
    chosen = p1 if rng.random() < 0.5 else p2
    child_depth = chosen.depth
    shortest = min(p1.depth, p2.depth)
    if shortest < 2:
        return clone_solution(chosen)

    cut = int(rng.integers(1, shortest))
    if p1.depth == p2.depth:
        head, tail = p1, p2
    elif child_depth == max(p1.depth, p2.depth):
        # longer child: smaller parent up to the cut, larger parent for the rest
        head, tail = (p1, p2) if p1.depth < p2.depth else (p2, p1)
    else:
        head, tail = (p1, p2) if p1.depth > p2.depth else (p2, p1)

    columns = [list(col) for col in head.columns[:cut]]
    columns += [list(col) for col in tail.columns[cut:child_depth]]
    return SolutionMatrix(p1.num_qubits, columns)


def uniform_column_crossover(
    p1: SolutionMatrix, p2: SolutionMatrix, rng: np.random.Generator
) -> SolutionMatrix:
    if p1.num_qubits != p2.num_qubits:
        raise ConfigurationError("parents act on different qubit counts")
    child_depth = p1.depth if rng.random() < 0.5 else p2.depth
    longer = p1 if p1.depth >= p2.depth else p2
    shared = min(p1.depth, p2.depth)

    columns = []
    for c in range(child_depth):
        if c < shared:
            source = p1 if rng.random() < 0.5 else p2
        else:
            source = longer
        columns.append(list(source.columns[c]))
    return SolutionMatrix(p1.num_qubits, columns)


# ---------------------------------------------------------------------------
# Mutation
# ---------------------------------------------------------------------------

def _single_qubit_positions(column) -> List[int]:
    return [q for q, cell in enumerate(column) if not cell.is_cx]


def mutate(
    solution: SolutionMatrix,
    kind: MutationKind,
    rng: np.random.Generator,
    gateset: Sequence[str] = DEFAULT_GATESET,
) -> SolutionMatrix:
    """Apply one mutation to a copy of ``solution``; kinds whose precondition fails are no-ops."""
    out = clone_solution(solution)
    n, depth = out.num_qubits, out.depth
    kind = MutationKind(kind)

    if kind is MutationKind.MUTATE_GATE:
        q, c = int(rng.integers(n)), int(rng.integers(depth))
        cell = out.columns[c][q]
        out.columns[c][q] = random_single_gate(gateset, rng)
        if cell.is_cx:
            out.columns[c][cell.partner] = random_single_gate(gateset, rng)

    elif kind is MutationKind.GATE_SWAP:
        candidates = [c for c, col in enumerate(out.columns) if len(_single_qubit_positions(col)) >= 2]
        if candidates:
            c = candidates[int(rng.integers(len(candidates)))]
            positions = _single_qubit_positions(out.columns[c])
            a, b = rng.choice(positions, size=2, replace=False)
            col = out.columns[c]
            col[a], col[b] = col[b], col[a]

    elif kind is MutationKind.COLUMN_SWAP:
        if depth >= 2:
            a, b = rng.choice(depth, size=2, replace=False)
            out.columns[a], out.columns[b] = out.columns[b], out.columns[a]

    elif kind is MutationKind.SWAP_CTRL_TARG:
        pairs = out.cx_pairs()
        if pairs:
            c, control, target = pairs[int(rng.integers(len(pairs)))]
            out.columns[c][control] = GateCell(GateKind.CX_TARGET, partner=target)
            out.columns[c][target] = GateCell(GateKind.CX_CONTROL, partner=control)

    elif kind is MutationKind.ADD_RANDOM_COLUMN:
        position = int(rng.integers(depth + 1))
        out.columns.insert(position, random_column(n, gateset, rng))

    elif kind is MutationKind.DELETE_COLUMN:
        if depth > 1:
            del out.columns[int(rng.integers(depth))]

    elif kind is MutationKind.ADD_CX:
        if n >= 2:
            control, target = (int(q) for q in rng.choice(n, size=2, replace=False))
            column = identity_column(n)
            column[control] = GateCell(GateKind.CX_CONTROL, partner=target)
            column[target] = GateCell(GateKind.CX_TARGET, partner=control)
            out.columns.insert(int(rng.integers(depth + 1)), column)

    elif kind is MutationKind.ADD_SINGLE_GATE:
        column = identity_column(n)
        column[int(rng.integers(n))] = random_single_gate(gateset, rng)
        out.columns.insert(int(rng.integers(depth + 1)), column)

    return out


def draw_mutation_kind(cfg: EAConfig, rng: np.random.Generator) -> MutationKind:
    if not cfg.mutation_weights:
        return MUTATION_KINDS[int(rng.integers(len(MUTATION_KINDS)))]
    weights = np.asarray(cfg.mutation_weights, dtype=float)
    return MUTATION_KINDS[int(rng.choice(len(MUTATION_KINDS), p=weights / weights.sum()))]


# ---------------------------------------------------------------------------
# Children and selection
# ---------------------------------------------------------------------------

def fresh_solution(problem: Problem, cfg: EAConfig, rng: np.random.Generator) -> SolutionMatrix:
    """A new individual's genome: random in scratch mode, the target circuit in target mode."""
    if cfg.init_mode is InitMode.TARGET:
        if problem.target_solution is None:
            raise ConfigurationError("target mode needs the target circuit")
        return clone_solution(problem.target_solution)
    return random_genome(problem, cfg, rng)


def random_genome(problem: Problem, cfg: EAConfig, rng: np.random.Generator) -> SolutionMatrix:
    return random_solution(
        problem.num_qubits, cfg.init_depth_range(problem.target_depth), cfg.gateset, rng
    )


def make_child(
    p1: Individual,
    p2: Individual,
    problem: Problem,
    cfg: EAConfig,
    rng: np.random.Generator,
) -> Individual:
    if cfg.variant is Variant.RANDOM_BASELINE:
        return evaluate(random_genome(problem, cfg, rng), problem, cfg, ("random",))

    if cfg.variant is Variant.NO_EA_OPS:
        genome, history = clone_solution(p1.solution), ["clone"]
    elif rng.random() < cfg.crossover_rate:
        if rng.random() < 0.5:
            genome, history = single_point_crossover(p1.solution, p2.solution, rng), ["single_point_crossover"]
        else:
            genome, history = uniform_column_crossover(p1.solution, p2.solution, rng), ["uniform_column_crossover"]
    elif rng.random() < 0.5:
        genome, history = fresh_solution(problem, cfg, rng), ["random"]
    else:
        parent = p1 if rng.random() < 0.5 else p2
        genome, history = clone_solution(parent.solution), ["clone"]

    if cfg.variant is not Variant.NO_EA_OPS and rng.random() < cfg.mutation_rate:
        kind = draw_mutation_kind(cfg, rng)
        genome = mutate(genome, kind, rng, cfg.gateset)
        history.append(f"mutate:{kind.value}")

    if cfg.uses_compaction:
        genome = compact(genome)
    return evaluate(genome, problem, cfg, history)


def select_parents(population: Sequence[Individual], rng: np.random.Generator) -> Tuple[Individual, Individual]:
    if not population:
        raise ConfigurationError("cannot select parents from an empty population")
    size = len(population)
    return population[int(rng.integers(size))], population[int(rng.integers(size))]


def survivor_replacement(
    population: Sequence[Individual],
    children: Sequence[Individual],
    cfg: EAConfig,
) -> List[Individual]:
    n, m = cfg.replace_count, cfg.offspring_count
    if n > m:
        raise ConfigurationError(f"replace count {n} exceeds offspring count {m}")
    if n > len(children):
        raise ConfigurationError(f"need {n} children, got {len(children)}")
    if n == 0:
        return list(population)
    # sorted() is stable, ties keep insertion order
    ranked = sorted(population, key=lambda ind: ind.fitness, reverse=True)
    best_children = sorted(children, key=lambda ind: ind.fitness, reverse=True)[:n]
    return ranked[: len(ranked) - n] + best_children


# ---------------------------------------------------------------------------
# Generation loop
# ---------------------------------------------------------------------------

def best_individual(population: Sequence[Individual]) -> Individual:
    return max(population, key=lambda ind: ind.fitness)


def make_record(population: Sequence[Individual], generation: int, target_depth: int) -> GenerationRecord:
    best = best_individual(population)
    return GenerationRecord(
        generation=generation,
        best_fitness=best.fitness,
        mean_fitness=float(np.mean([ind.fitness for ind in population])),
        best_fidelity=best.fidelity,
        best_depth=best.depth,
        depth_reduction_pct=100.0 * (target_depth - best.depth) / target_depth,
    )


def check_population(population: Sequence[Individual], generation: int) -> None:
    for ind in population:
        problem = validate(ind.solution)
        if problem is not None:
            raise InvariantViolation(problem, generation=generation)
        if ind.depth != ind.solution.depth:
            raise InvariantViolation("cached depth out of date", generation=generation)


def initial_population(problem: Problem, cfg: EAConfig, rng: np.random.Generator) -> List[Individual]:
    population = []
    for _ in range(cfg.population_size):
        genome = fresh_solution(problem, cfg, rng)
        if cfg.uses_compaction:
            genome = compact(genome)
        population.append(evaluate(genome, problem, cfg, ("init",)))
    return population


def step_generation(
    population: Sequence[Individual],
    problem: Problem,
    cfg: EAConfig,
    rng: np.random.Generator,
    gen_index: int,
) -> Tuple[List[Individual], GenerationRecord]:
    children = []
    for _ in range(cfg.offspring_count):
        p1, p2 = select_parents(population, rng)
        children.append(make_child(p1, p2, problem, cfg, rng))

    population = survivor_replacement(population, children, cfg)

    if cfg.uses_param_opt and gen_index % cfg.param_opt_interval == 0:
        from src.param_opt import hybrid_hook
        population = hybrid_hook(population, problem, cfg, rng)

    if cfg.check_invariants:
        check_population(population, gen_index)
    return population, make_record(population, gen_index, problem.target_depth)


def run_evolution(
    problem: Problem,
    cfg: EAConfig,
    rng: np.random.Generator,
    on_record: Optional[Callable[[GenerationRecord], None]] = None,
) -> Tuple[List[Individual], List[GenerationRecord]]:
    """Initial population plus ``cfg.generations`` steps; ``on_record`` sees every record as it is made."""
    cfg.validate()
    population = initial_population(problem, cfg, rng)
    if cfg.check_invariants:
        check_population(population, 0)

    records = [make_record(population, 0, problem.target_depth)]
    if on_record:
        on_record(records[0])

    generations = range(1, cfg.generations + 1)
    if cfg.show_progress:
        generations = tqdm(generations, desc=f"seed {cfg.seed} {cfg.variant.value}", unit="gen")
    for gen in generations:
        population, record = step_generation(population, problem, cfg, rng, gen)
        records.append(record)
        logger.debug(
            "gen %d best=%.5f mean=%.5f F=%.5f depth=%d",
            gen, record.best_fitness, record.mean_fitness, record.best_fidelity, record.best_depth,
        )
        if on_record:
            on_record(record)
    return population, records
