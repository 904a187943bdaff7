import dataclasses

import numpy as np
import pytest

from conftest import cx, single
from src.circuit import DEFAULT_GATESET, GateKind, SolutionMatrix, random_solution, validate
from src.compactor import compact
from src.config import EAConfig, InitMode, Variant
from src.errors import ConfigurationError
from src.evolution import (
    MUTATION_KINDS,
    Individual,
    MutationKind,
    evaluate,
    fitness,
    make_child,
    mutate,
    normalized_depth,
    run_evolution,
    select_parents,
    single_point_crossover,
    step_generation,
    survivor_replacement,
    uniform_column_crossover,
)


class ScriptedRng:
    def __init__(self, integers=(), randoms=()):
        self._integers = list(integers)
        self._randoms = list(randoms)

    def integers(self, low, high=None):
        return self._integers.pop(0)

    def random(self):
        return self._randoms.pop(0)


def labelled(depth, tag, n=2):
    """Columns distinguishable by content: RZ angles encode parent tag, column and qubit."""
    return SolutionMatrix(
        n, [single(*[tag + 0.1 * c + 0.01 * q for q in range(n)]) for c in range(depth)]
    )


def stub(fit):
    return Individual(solution=None, state=None, fidelity=0.0, depth=1, fitness=fit, breakdown=None)


# ─── Fitness ────────────────────────────────────────────────────────────

def test_normalized_depth_values():
    assert normalized_depth(1, 20) == 0.0
    assert normalized_depth(20, 20) == 1.0
    assert normalized_depth(4, 20) == pytest.approx(3 / 19)
    assert normalized_depth(30, 20) > 1.0


def test_normalized_depth_rejects_trivial_target():
    with pytest.raises(ConfigurationError):
        normalized_depth(1, 1)


def test_fitness_spot_values():
    assert fitness(1.0, 1, 20, 10, 1).total == 10.0
    assert fitness(0.0, 20, 20, 10, 1).total == -1.0
    spot = fitness(0.98, 4, 20, 10, 1)
    assert spot.total == pytest.approx(9.64211, abs=1e-5)
    assert spot.A == pytest.approx(1 - 3 / 19)
    assert spot.B == pytest.approx(0.02)


def test_fitness_matches_formula_on_random_inputs():
    rng = np.random.default_rng(9)
    for _ in range(2000):
        d = int(rng.integers(2, 60))
        delta = int(rng.integers(1, d + 1))
        F = float(rng.random())
        b = fitness(F, delta, d, 10.0, 1.0)
        assert abs(b.total - (10.0 * F - (delta - 1) / (d - 1))) < 1e-12
        assert 0.0 <= b.delta_norm <= 1.0
        assert 0.0 <= b.A <= 1.0 and 0.0 <= b.B <= 1.0


# ─── Crossover ──────────────────────────────────────────────────────────

def test_single_point_equal_depth_parents():
    p1, p2 = labelled(4, 0), labelled(4, 1)
    # parent choice 0.2 -> p1 depth, cut index 2
    child = single_point_crossover(p1, p2, ScriptedRng(integers=[2], randoms=[0.2]))
    assert child.columns == p1.columns[:2] + p2.columns[2:]


def test_single_point_identical_parents(rng, bell_matrix):
    for _ in range(20):
        assert single_point_crossover(bell_matrix, bell_matrix, rng) == bell_matrix


def test_single_point_longer_child_takes_tail_from_longer_parent():
    p1, p2 = labelled(2, 0), labelled(6, 1)
    child = single_point_crossover(p1, p2, ScriptedRng(integers=[1], randoms=[0.9]))
    assert child.depth == 6
    assert child.columns == p1.columns[:1] + p2.columns[1:]


def test_single_point_depth_one_parent_copies_whole_parent():
    p1, p2 = labelled(1, 0), labelled(5, 1)
    child = single_point_crossover(p1, p2, ScriptedRng(randoms=[0.9]))
    assert child == p2


def test_uniform_column_follows_coin_flips():
    p1, p2 = labelled(4, 0), labelled(4, 1)
    # child depth from p1, then coins P2, P1, P2, P2
    child = uniform_column_crossover(p1, p2, ScriptedRng(randoms=[0.1, 0.7, 0.2, 0.9, 0.6]))
    assert child.columns == [p2.columns[0], p1.columns[1], p2.columns[2], p2.columns[3]]


def test_uniform_column_fills_from_longer_parent():
    rng = np.random.default_rng(4)
    p1, p2 = labelled(3, 0), labelled(5, 1)
    for _ in range(50):
        child = uniform_column_crossover(p1, p2, rng)
        if child.depth == 5:
            assert child.columns[3:] == p2.columns[3:]
        else:
            assert child.depth == 3


def test_uniform_column_identical_parents(rng, bell_matrix):
    assert uniform_column_crossover(bell_matrix, bell_matrix, rng) == bell_matrix


def test_crossovers_preserve_validity():
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        p1 = random_solution(n, (1, 8), DEFAULT_GATESET, rng)
        p2 = random_solution(n, (1, 8), DEFAULT_GATESET, rng)
        assert validate(single_point_crossover(p1, p2, rng)) is None
        assert validate(uniform_column_crossover(p1, p2, rng)) is None


# ─── Mutation ───────────────────────────────────────────────────────────

def test_mutate_gate_on_cx_replaces_both_cells():
    matrix = SolutionMatrix(2, [cx(0, 1, 2)])
    # cell (0, 0), then single gates drawn for both qubits
    rng = np.random.default_rng(0)
    for _ in range(30):
        out = mutate(matrix, MutationKind.MUTATE_GATE, rng)
        assert not any(cell.is_cx for cell in out.columns[0])
        assert validate(out) is None
    assert matrix.columns[0][0].kind is GateKind.CX_CONTROL


def test_delete_column_keeps_depth_one(rng):
    matrix = SolutionMatrix(2, [single("X", "SX")])
    assert mutate(matrix, MutationKind.DELETE_COLUMN, rng) == matrix


def test_add_cx_adds_one_pair_column(rng):
    matrix = SolutionMatrix(2, [single("X", "SX"), single("H", "ID")])
    out = mutate(matrix, MutationKind.ADD_CX, rng)
    assert out.depth == 3
    assert len(out.cx_pairs()) == 1


def test_add_single_gate_fills_identities(rng):
    matrix = SolutionMatrix(3, [single("X", "X", "X")])
    out = mutate(matrix, MutationKind.ADD_SINGLE_GATE, rng)
    assert out.depth == 2
    new = [col for col in out.columns if col != matrix.columns[0]]
    assert len(new) == 1
    assert sum(not cell.is_identity for cell in new[0]) <= 1


def test_swap_ctrl_targ(rng):
    matrix = SolutionMatrix(2, [cx(0, 1, 2)])
    assert mutate(matrix, MutationKind.SWAP_CTRL_TARG, rng).columns[0] == cx(1, 0, 2)


def test_swap_ctrl_targ_without_cx_is_noop(rng):
    matrix = SolutionMatrix(2, [single("X", "SX")])
    assert mutate(matrix, MutationKind.SWAP_CTRL_TARG, rng) == matrix


def test_gate_swap_needs_two_single_gates(rng):
    matrix = SolutionMatrix(2, [cx(0, 1, 2)])
    assert mutate(matrix, MutationKind.GATE_SWAP, rng) == matrix
    swapped = mutate(SolutionMatrix(2, [single("X", "H")]), MutationKind.GATE_SWAP, rng)
    assert swapped.columns[0] == single("H", "X")


def test_column_swap(rng):
    matrix = SolutionMatrix(1, [single("X"), single("H")])
    assert mutate(matrix, MutationKind.COLUMN_SWAP, rng).columns == [single("H"), single("X")]


def test_add_random_column_grows_depth(rng):
    matrix = SolutionMatrix(3, [single("X", "X", "X")])
    assert mutate(matrix, MutationKind.ADD_RANDOM_COLUMN, rng).depth == 2


@pytest.mark.parametrize("kind", MUTATION_KINDS)
def test_every_mutation_preserves_validity(kind):
    rng = np.random.default_rng(MUTATION_KINDS.index(kind))
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        matrix = random_solution(n, (1, 6), DEFAULT_GATESET, rng)
        out = mutate(matrix, kind, rng)
        assert validate(out) is None
        assert validate(matrix) is None


# ─── Selection ──────────────────────────────────────────────────────────

def _replace_cfg(size, rate):
    return EAConfig(population_size=size, offspring_rate=rate, replace_rate=rate)


def test_survivor_replacement_trace():
    population = [stub(f) for f in (5, 4, 3, 2)]
    children = [stub(1), stub(9)]
    out = survivor_replacement(population, children, _replace_cfg(4, 0.5))
    assert [ind.fitness for ind in out] == [5, 4, 9, 1]


def test_survivor_replacement_is_unconditional():
    population = [stub(f) for f in (5, 4, 3, 2)]
    children = [stub(-1), stub(-2)]
    out = survivor_replacement(population, children, _replace_cfg(4, 0.5))
    assert [ind.fitness for ind in out] == [5, 4, -1, -2]


def test_survivor_replacement_zero():
    population = [stub(f) for f in (1, 2, 3)]
    out = survivor_replacement(population, [], _replace_cfg(3, 0.0))
    assert out == population


def test_survivor_replacement_rejects_replace_above_offspring():
    cfg = EAConfig(population_size=10, offspring_rate=0.1, replace_rate=0.3)
    with pytest.raises(ConfigurationError):
        survivor_replacement([stub(1)] * 10, [stub(1)], cfg)


def test_select_parents_single_member(rng):
    only = stub(3)
    assert select_parents([only], rng) == (only, only)


def test_select_parents_is_uniform():
    rng = np.random.default_rng(17)
    population = [stub(i) for i in range(200)]
    index = {id(ind): i for i, ind in enumerate(population)}
    counts = np.zeros(200)
    for _ in range(50_000):
        a, b = select_parents(population, rng)
        counts[index[id(a)]] += 1
        counts[index[id(b)]] += 1
    expected = 100_000 / 200
    sigma = np.sqrt(100_000 * (1 / 200) * (1 - 1 / 200))
    assert np.all(np.abs(counts - expected) < 5 * sigma)


def test_select_parents_ignores_fitness():
    population = [stub(i) for i in range(20)]
    relabelled = [stub(-i * 7) for i in range(20)]
    a = select_parents(population, np.random.default_rng(3))
    b = select_parents(relabelled, np.random.default_rng(3))
    assert population.index(a[0]) == relabelled.index(b[0])
    assert population.index(a[1]) == relabelled.index(b[1])


# ─── Children and generations ───────────────────────────────────────────

def test_make_child_identical_parents(problem_4x6, rng):
    cfg = EAConfig(population_size=10, crossover_rate=1.0, mutation_rate=0.0).validate()
    parent = evaluate(compact(problem_4x6.target_solution), problem_4x6, cfg)
    for _ in range(20):
        child = make_child(parent, parent, problem_4x6, cfg, rng)
        assert child.solution == parent.solution
        assert child.fitness == parent.fitness


def test_make_child_no_crossover_branch_is_even_split(problem_4x6):
    cfg = EAConfig(population_size=10, crossover_rate=0.0, mutation_rate=0.0, compaction_enabled=False).validate()
    rng = np.random.default_rng(21)
    parent = evaluate(problem_4x6.target_solution, problem_4x6, cfg)
    trials = 10_000
    randoms = sum(
        make_child(parent, parent, problem_4x6, cfg, rng).history[0] == "random"
        for _ in range(trials)
    )
    sigma = np.sqrt(trials * 0.25)
    assert abs(randoms - trials / 2) < 5 * sigma


def test_make_child_logs_mutation(problem_4x6, rng):
    cfg = EAConfig(population_size=10, mutation_rate=1.0).validate()
    parent = evaluate(problem_4x6.target_solution, problem_4x6, cfg)
    child = make_child(parent, parent, problem_4x6, cfg, rng)
    assert any(step.startswith("mutate:") for step in child.history)
    assert validate(child.solution) is None


def test_make_child_target_mode_random_branch_uses_target(problem_4x6, rng):
    cfg = EAConfig(population_size=10, crossover_rate=0.0, mutation_rate=0.0,
                   init_mode=InitMode.TARGET).validate()
    parent = evaluate(SolutionMatrix(4, [single("X", "X", "X", "X")]), problem_4x6, cfg)
    for _ in range(50):
        child = make_child(parent, parent, problem_4x6, cfg, rng)
        if child.history[0] == "random":
            assert child.solution == compact(problem_4x6.target_solution)


def test_target_mode_starts_from_the_compacted_target(problem_4x6, rng):
    cfg = EAConfig(population_size=10, generations=0, init_mode=InitMode.TARGET).validate()
    population, records = run_evolution(problem_4x6, cfg, rng)
    packed = compact(problem_4x6.target_solution)
    assert packed.depth == problem_4x6.target_depth
    assert all(ind.solution == packed for ind in population)
    assert records[0].best_fidelity == pytest.approx(1.0, abs=1e-9)
    assert records[0].depth_reduction_pct == 0.0


def test_generations_zero_records_initial_population(problem_4x6, tiny_cfg, rng):
    cfg = dataclasses.replace(tiny_cfg, generations=0)
    population, records = run_evolution(problem_4x6, cfg, rng)
    assert len(records) == 1
    assert records[0].generation == 0
    assert len(population) == cfg.population_size


def test_step_generation_keeps_best_and_size(problem_4x6, tiny_cfg):
    rng = np.random.default_rng(31)
    cfg = dataclasses.replace(tiny_cfg, variant=Variant.EA_ONLY)
    population, _ = run_evolution(problem_4x6, dataclasses.replace(cfg, generations=0), rng)
    for gen in range(1, 1001):
        before = max(ind.fitness for ind in population)
        population, record = step_generation(population, problem_4x6, cfg, rng, gen)
        assert record.best_fitness >= before
        assert len(population) == cfg.population_size
        assert all(validate(ind.solution) is None for ind in population)


def test_hybrid_step_optimizes_at_interval(problem_4x6, monkeypatch):
    import src.param_opt as param_opt

    touched = []
    real_optimize = param_opt.optimize

    def spy(individual, problem, cfg, max_iterations=None, rng=None):
        touched.append(individual)
        return real_optimize(individual, problem, cfg, max_iterations, rng)

    monkeypatch.setattr(param_opt, "optimize", spy)
    cfg = EAConfig(population_size=20, generations=0, param_opt_interval=5,
                   max_optimizer_iterations=5).validate()
    rng = np.random.default_rng(2)
    population, _ = run_evolution(problem_4x6, cfg, rng)
    for gen in range(1, 11):
        population, _ = step_generation(population, problem_4x6, cfg, rng, gen)
    # generations 5 and 10, ceil(0.1 * 20) = 2 each
    assert len(touched) == 4


def test_records_fitness_recomputable(problem_4x6, tiny_cfg, rng):
    population, records = run_evolution(problem_4x6, tiny_cfg, rng)
    for ind in population:
        expected = tiny_cfg.alpha * ind.fidelity - tiny_cfg.beta * (ind.depth - 1) / (problem_4x6.target_depth - 1)
        assert ind.fitness == pytest.approx(expected, abs=1e-12)
        assert ind.depth == ind.solution.depth


def test_run_is_deterministic(problem_4x6, tiny_cfg):
    _, a = run_evolution(problem_4x6, tiny_cfg, np.random.default_rng(5))
    _, b = run_evolution(problem_4x6, tiny_cfg, np.random.default_rng(5))
    assert a == b


@pytest.mark.parametrize("variant", list(Variant))
def test_best_fitness_is_monotone(problem_4x6, variant):
    cfg = EAConfig(population_size=20, generations=50, variant=variant,
                   param_opt_interval=10, max_optimizer_iterations=40).validate()
    for seed in range(25):
        _, records = run_evolution(problem_4x6, cfg, np.random.default_rng(seed))
        best = [r.best_fitness for r in records]
        assert all(b >= a - 1e-12 for a, b in zip(best, best[1:]))
