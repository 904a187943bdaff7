"""Dense statevector simulation of solution matrices.

Qubit 0 is the most significant bit of a basis index, so ``|10>`` (qubit 0 set)
is amplitude 2. Gates are applied by reshaping the amplitude array so the
target qubit becomes its own axis, which costs O(2^n) per gate.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.circuit import Column, GateCell, GateKind, SolutionMatrix
from src.errors import ConfigurationError, InvariantViolation

NORM_TOLERANCE = 1e-10

_SQRT2_INV = 1 / math.sqrt(2)
_GATE_1Q = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.SX: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
}


def rz_matrix(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def gate_matrix(cell: GateCell) -> np.ndarray:
    """2x2 unitary of a single-qubit cell."""
    if cell.kind is GateKind.ID:
        return np.eye(2, dtype=complex)
    if cell.kind is GateKind.RZ:
        return rz_matrix(cell.theta)
    if cell.kind in _GATE_1Q:
        return _GATE_1Q[cell.kind]
    raise InvariantViolation(f"{cell.kind.value} is not a single-qubit gate")


@dataclass(frozen=True)
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> "Statevector":
        amps = np.asarray(amplitudes, dtype=complex)
        n = int(round(math.log2(amps.size))) if amps.size else 0
        if n < 1 or amps.size != 2 ** n:
            raise ConfigurationError(f"{amps.size} amplitudes is not a power of two >= 2")
        return cls(n, amps)


def zero_state(num_qubits: int) -> Statevector:
    if num_qubits < 1:
        raise ConfigurationError("num_qubits must be >= 1")
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[0] = 1.0
    return Statevector(num_qubits, amps)


def _apply_single_qubit(amps: np.ndarray, matrix: np.ndarray, qubit: int, n: int) -> np.ndarray:
    psi = amps.reshape((2 ** qubit, 2, 2 ** (n - qubit - 1)))
    return np.einsum("ij,ajb->aib", matrix, psi).reshape(-1)


def _apply_cx(amps: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    psi = amps.reshape((2,) * n).copy()
    index = [slice(None)] * n
    index[control] = 1
    index = tuple(index)
    # the control axis disappears from the slice
    axis = target if target < control else target - 1
    psi[index] = np.flip(psi[index], axis=axis).copy()
    return psi.reshape(-1)


def apply_column(state: Statevector, column: Column) -> Statevector:
    n = state.num_qubits
    if len(column) != n:
        raise InvariantViolation(f"column has {len(column)} cells for {n} qubits")

    amps = state.amplitudes
    for q, cell in enumerate(column):
        if cell.kind is GateKind.ID or cell.kind is GateKind.CX_TARGET:
            continue
        if cell.kind is GateKind.CX_CONTROL:
            p = cell.partner
            if (
                p is None
                or not 0 <= p < n
                or p == q
                or column[p].kind is not GateKind.CX_TARGET
                or column[p].partner != q
            ):
                raise InvariantViolation(f"unpaired CX on qubit {q}")
            amps = _apply_cx(amps, q, p, n)
            continue
        amps = _apply_single_qubit(amps, gate_matrix(cell), q, n)

    if amps is state.amplitudes:
        amps = amps.copy()
    return Statevector(n, amps)


def simulate(matrix: SolutionMatrix) -> Statevector:
    state = zero_state(matrix.num_qubits)
    for column in matrix.columns:
        state = apply_column(state, column)
    return state


def fidelity(a: Statevector, b: Statevector) -> float:
    """|<a|b>| clamped to [0, 1]; for pure states this is the square-root fidelity."""
    if a.num_qubits != b.num_qubits or a.amplitudes.shape != b.amplitudes.shape:
        raise ConfigurationError(
            f"Cannot compare {a.num_qubits}-qubit and {b.num_qubits}-qubit states"
        )
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes))
    return float(min(1.0, max(0.0, overlap)))
