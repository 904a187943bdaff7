"""Gate vocabulary and the solution-matrix genome.

A genome is stored column-major: ``columns[c][q]`` is the gate acting on qubit
``q`` at time step ``c``. Every cell is occupied, CX gates occupy two cells of
the same column that point at each other through ``partner``.
"""
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigurationError, InvariantViolation

TWO_PI = 2.0 * math.pi


class GateKind(str, Enum):
    ID = "ID"
    X = "X"
    SX = "SX"
    RZ = "RZ"
    CX_CONTROL = "CX_CONTROL"
    CX_TARGET = "CX_TARGET"
    # simulator/test only, never drawn by the EA
    H = "H"


CX_KINDS = (GateKind.CX_CONTROL, GateKind.CX_TARGET)

# names accepted in a gate set; "CX" stands for a control/target pair
GATESET_NAMES = ("ID", "X", "SX", "RZ", "CX", "H")
DEFAULT_GATESET: Tuple[str, ...] = ("ID", "X", "SX", "RZ", "CX")


def wrap_angle(theta: float) -> float:
    wrapped = float(theta) % TWO_PI
    # -1e-17 % 2pi rounds up to exactly 2pi
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


@dataclass(frozen=True)
class GateCell:
    kind: GateKind
    theta: Optional[float] = None
    partner: Optional[int] = None

    @classmethod
    def identity(cls) -> "GateCell":
        return cls(GateKind.ID)

    @classmethod
    def rz(cls, theta: float) -> "GateCell":
        return cls(GateKind.RZ, theta=wrap_angle(theta))

    @property
    def is_cx(self) -> bool:
        return self.kind in CX_KINDS

    @property
    def is_identity(self) -> bool:
        return self.kind is GateKind.ID

    def to_dict(self) -> Dict:
        out = {"kind": self.kind.value}
        if self.kind is GateKind.RZ:
            out["theta"] = self.theta
        if self.is_cx:
            out["partner"] = self.partner
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "GateCell":
        try:
            kind = GateKind(data["kind"])
            if kind is GateKind.RZ:
                # stored as written so validate() can see out-of-range angles
                return cls(kind, theta=float(data["theta"]))
            if kind in CX_KINDS:
                return cls(kind, partner=int(data["partner"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Malformed gate cell {data!r}") from e
        return cls(kind)


Column = List[GateCell]


def identity_column(num_qubits: int) -> Column:
    return [GateCell.identity() for _ in range(num_qubits)]


@dataclass
class SolutionMatrix:
    num_qubits: int
    columns: List[Column] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.columns)

    def cx_pairs(self) -> List[Tuple[int, int, int]]:
        """(column, control, target) for every CX pair, column by column."""
        pairs = []
        for c, col in enumerate(self.columns):
            for q, cell in enumerate(col):
                if cell.kind is GateKind.CX_CONTROL:
                    pairs.append((c, q, cell.partner))
        return pairs

    def to_dict(self) -> Dict:
        return {
            "num_qubits": self.num_qubits,
            "columns": [[cell.to_dict() for cell in col] for col in self.columns],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SolutionMatrix":
        try:
            columns = [[GateCell.from_dict(c) for c in col] for col in data["columns"]]
            return cls(int(data["num_qubits"]), columns)
        except ConfigurationError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"Malformed solution matrix: {e}") from e


def solution_to_json(matrix: SolutionMatrix, indent: Optional[int] = None) -> str:
    return json.dumps(matrix.to_dict(), indent=indent)


def solution_from_json(text: str) -> SolutionMatrix:
    try:
        data = json.loads(text)
    except ValueError as e:
        raise ConfigurationError(f"Solution is not valid JSON: {e}") from e
    return SolutionMatrix.from_dict(data)


def validate_gateset(gateset: Sequence[str]) -> Tuple[str, ...]:
    gateset = tuple(gateset)
    if not gateset:
        raise ConfigurationError("Gate set must not be empty")
    unknown = [g for g in gateset if g not in GATESET_NAMES]
    if unknown:
        raise ConfigurationError(f"Unknown gates in gate set: {unknown}")
    return gateset


def _single_gate(name: str, rng: np.random.Generator) -> GateCell:
    if name == "RZ":
        return GateCell.rz(rng.uniform(0.0, TWO_PI))
    return GateCell(GateKind(name))


def random_single_gate(gateset: Sequence[str], rng: np.random.Generator) -> GateCell:
    """A random single-qubit gate from the gate set; ID when the set only holds CX."""
    singles = [g for g in gateset if g != "CX"]
    if not singles:
        return GateCell.identity()
    return _single_gate(singles[rng.integers(len(singles))], rng)


def random_column(num_qubits: int, gateset: Sequence[str], rng: np.random.Generator) -> Column:
    if num_qubits < 1:
        raise ConfigurationError("num_qubits must be >= 1")
    gateset = validate_gateset(gateset)

    cells: List[Optional[GateCell]] = [None] * num_qubits
    for q in range(num_qubits):
        if cells[q] is not None:
            continue
        name = gateset[rng.integers(len(gateset))]
        if name != "CX":
            cells[q] = _single_gate(name, rng)
            continue

        free = [p for p in range(num_qubits) if p != q and cells[p] is None]
        if not free:
            cells[q] = random_single_gate(gateset, rng)
            continue
        p = free[rng.integers(len(free))]
        control, target = (q, p) if rng.random() < 0.5 else (p, q)
        cells[control] = GateCell(GateKind.CX_CONTROL, partner=target)
        cells[target] = GateCell(GateKind.CX_TARGET, partner=control)
    return cells


def random_solution(
    num_qubits: int,
    depth_range: Tuple[int, int],
    gateset: Sequence[str],
    rng: np.random.Generator,
) -> SolutionMatrix:
    lo, hi = depth_range
    if not 1 <= lo <= hi:
        raise ConfigurationError(f"Invalid depth range [{lo}, {hi}]")
    depth = int(rng.integers(lo, hi + 1))
    return SolutionMatrix(
        num_qubits, [random_column(num_qubits, gateset, rng) for _ in range(depth)]
    )


def validate(matrix: SolutionMatrix) -> Optional[str]:
    """Return the first violated invariant as a message, or None when the matrix is valid."""
    n = matrix.num_qubits
    if n < 1:
        return "num_qubits must be >= 1"
    if matrix.depth < 1:
        return "depth must be >= 1"

    for c, col in enumerate(matrix.columns):
        if len(col) != n:
            return f"ragged column {c}: {len(col)} cells for {n} qubits"
        for q, cell in enumerate(col):
            where = f"(qubit {q}, column {c})"
            if not isinstance(cell, GateCell):
                return f"empty cell at {where}"
            if cell.kind is GateKind.RZ:
                if cell.theta is None or not 0.0 <= cell.theta < TWO_PI:
                    return f"angle out of range at {where}: {cell.theta}"
            elif cell.theta is not None:
                return f"angle on non-rotation gate at {where}"

            if not cell.is_cx:
                if cell.partner is not None:
                    return f"partner on single-qubit gate at {where}"
                continue
            p = cell.partner
            if p is None or not 0 <= p < n or p == q:
                return f"unpaired CX at {where}"
            other = col[p]
            expected = (
                GateKind.CX_TARGET if cell.kind is GateKind.CX_CONTROL else GateKind.CX_CONTROL
            )
            if not isinstance(other, GateCell) or other.kind is not expected or other.partner != q:
                return f"unpaired CX at {where}"
    return None


def ensure_valid(matrix: SolutionMatrix, generation=None) -> SolutionMatrix:
    problem = validate(matrix)
    if problem is not None:
        raise InvariantViolation(problem, generation=generation)
    return matrix


def clone_solution(matrix: SolutionMatrix) -> SolutionMatrix:
    # cells are frozen, copying the column lists is a deep copy
    return SolutionMatrix(matrix.num_qubits, [list(col) for col in matrix.columns])
