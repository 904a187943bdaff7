import os
import sys

# ─── Make docker-image/ importable as the root of the `src` package ─────
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)

import numpy as np
import pytest

from src.circuit import GateCell, GateKind, SolutionMatrix, identity_column
from src.config import EAConfig
from src.evolution import Problem
from src.harness import generate_target

RUN_SLOW = os.getenv("RUN_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set RUN_SLOW=1 to run full-scale experiments")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ─── Cell helpers ───────────────────────────────────────────────────────
def cx(control, target, n):
    """A column holding one CX pair, identities elsewhere."""
    column = identity_column(n)
    column[control] = GateCell(GateKind.CX_CONTROL, partner=target)
    column[target] = GateCell(GateKind.CX_TARGET, partner=control)
    return column


def single(*kinds):
    """A column from single-qubit kinds, floats become RZ angles."""
    return [
        GateCell.rz(k) if isinstance(k, float) else GateCell(GateKind(k))
        for k in kinds
    ]


# ─── Fixtures ───────────────────────────────────────────────────────────
@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell_matrix():
    return SolutionMatrix(2, [single("H", "ID"), cx(0, 1, 2)])


@pytest.fixture
def tiny_cfg():
    return EAConfig(
        population_size=10,
        generations=6,
        max_optimizer_iterations=30,
        param_opt_interval=3,
    ).validate()


@pytest.fixture
def target_4x6():
    return generate_target(4, 6, seed=7)


@pytest.fixture
def problem_4x6(target_4x6):
    circuit, state = target_4x6
    return Problem(target_state=state, target_depth=circuit.depth, target_solution=circuit)
