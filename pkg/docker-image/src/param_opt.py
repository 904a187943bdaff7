"""Derivative-free tuning of the RZ angles of selected individuals.

Only angles change; gate kinds, CX pairings and depth are left alone. The
optimizer is scipy's COBYLA, wrapped so that the evaluation budget is a hard
cap and the best point seen is returned even if COBYLA ends elsewhere.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from src.circuit import GateCell, GateKind, SolutionMatrix, clone_solution
from src.config import EAConfig
from src.errors import InvariantViolation
from src.evolution import Individual, Problem, evaluate
from src.simulator import Statevector, fidelity, simulate

logger = logging.getLogger(__name__)


@dataclass
class ParamVector:
    # (qubit, column) of every RZ cell, qubit-major
    locations: List[Tuple[int, int]]
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.locations)


def extract_params(solution: SolutionMatrix) -> ParamVector:
    locations = [
        (q, c)
        for q in range(solution.num_qubits)
        for c in range(solution.depth)
        if solution.columns[c][q].kind is GateKind.RZ
    ]
    values = np.array([solution.columns[c][q].theta for q, c in locations], dtype=float)
    return ParamVector(locations, values)


def with_params(solution: SolutionMatrix, params: ParamVector, values: Optional[Sequence[float]] = None) -> SolutionMatrix:
    """Copy of ``solution`` with the angles written back (wrapped into [0, 2pi))."""
    values = params.values if values is None else values
    if len(values) != len(params.locations):
        raise InvariantViolation(f"{len(values)} angles for {len(params.locations)} rotation gates")
    out = clone_solution(solution)
    for (q, c), theta in zip(params.locations, values):
        if not (0 <= c < out.depth and 0 <= q < out.num_qubits) or out.columns[c][q].kind is not GateKind.RZ:
            raise InvariantViolation(f"no rotation gate at (qubit {q}, column {c})")
        out.columns[c][q] = GateCell.rz(theta)
    return out


def objective(solution: SolutionMatrix, params: ParamVector, target: Statevector,
              values: Optional[Sequence[float]] = None) -> float:
    state = simulate(with_params(solution, params, values))
    return min(1.0, max(0.0, 1.0 - fidelity(state, target)))


class _StopOptimizer(Exception):
    pass


def optimize(
    individual: Individual,
    problem: Problem,
    cfg: EAConfig,
    max_iterations: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Individual:
    """Minimise 1 - F over the individual's angles, starting from its current ones.

    ``max_iterations`` caps objective evaluations after the initial one; the run
    also stops once 1 - F drops to ``cfg.optimizer_ftol``. ``cfg.optimizer_rhoend``
    is COBYLA's final trust-region radius, which scipy calls ``tol``.

    COBYLA is deterministic, ``rng`` is accepted so callers can swap in a
    stochastic optimizer without changing the call sites.
    """
    budget = cfg.max_optimizer_iterations if max_iterations is None else max_iterations
    params = extract_params(individual.solution)
    if not len(params) or budget < 1:
        return individual

    solution, target = individual.solution, problem.target_state
    start = objective(solution, params, target)
    if start <= cfg.optimizer_ftol:
        return individual
    best = {"value": start, "x": None}
    evaluations = 0

    def fun(x):
        nonlocal evaluations
        if evaluations >= budget:
            raise _StopOptimizer
        evaluations += 1
        value = objective(solution, params, target, x)
        if value < best["value"]:
            best["value"], best["x"] = value, np.array(x, dtype=float)
        if value <= cfg.optimizer_ftol:
            raise _StopOptimizer
        return value

    try:
        with warnings.catch_warnings():
            # COBYLA warns when maxiter < n + 2 or the budget runs out
            warnings.simplefilter("ignore")
            minimize(
                fun,
                params.values.copy(),
                method="COBYLA",
                tol=cfg.optimizer_rhoend,
                options={"maxiter": budget, "rhobeg": cfg.optimizer_rhobeg},
            )
    except _StopOptimizer:
        pass

    logger.debug("optimized %d angles: %.3e -> %.3e in %d evaluations",
                 len(params), start, best["value"], evaluations)
    if best["x"] is None:
        return individual
    tuned = with_params(solution, params, best["x"])
    return evaluate(tuned, problem, cfg, individual.history + ("param_opt",))


def hybrid_hook(
    population: Sequence[Individual],
    problem: Problem,
    cfg: EAConfig,
    rng: np.random.Generator,
) -> List[Individual]:
    population = list(population)
    count = min(cfg.param_opt_count, len(population))
    if count == 0:
        return population

    chosen = rng.choice(len(population), size=count, replace=False)
    for i in chosen:
        population[i] = optimize(population[i], problem, cfg, rng=rng)
    logger.debug("parameter optimization touched %d individuals", count)
    return population
