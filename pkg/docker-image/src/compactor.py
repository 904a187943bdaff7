"""Semantics-preserving simplification of solution matrices.

Three rewrites, looped to a fixpoint by ``compact``: merge adjacent rotations,
shift gates left across identities, drop all-identity columns. The heuristic is
deliberately incomplete; it never changes the prepared state.
"""
import logging

from src.circuit import (
    GateCell,
    GateKind,
    SolutionMatrix,
    clone_solution,
    identity_column,
)

logger = logging.getLogger(__name__)


def merge_rotations(matrix: SolutionMatrix) -> SolutionMatrix:
    out = clone_solution(matrix)
    for q in range(out.num_qubits):
        for c in range(out.depth - 1):
            first = out.columns[c][q]
            second = out.columns[c + 1][q]
            if first.kind is GateKind.RZ and second.kind is GateKind.RZ:
                out.columns[c][q] = GateCell.rz(first.theta + second.theta)
                out.columns[c + 1][q] = GateCell.identity()
    return out


def _shift_pass(matrix: SolutionMatrix) -> bool:
    moved = False
    columns = matrix.columns
    for c in range(1, matrix.depth):
        prev, cur = columns[c - 1], columns[c]
        for q in range(matrix.num_qubits):
            cell = cur[q]
            if cell.is_identity or cell.kind is GateKind.CX_TARGET:
                continue
            if cell.kind is GateKind.CX_CONTROL:
                p = cell.partner
                if prev[q].is_identity and prev[p].is_identity:
                    prev[q], prev[p] = cur[q], cur[p]
                    cur[q], cur[p] = GateCell.identity(), GateCell.identity()
                    moved = True
            elif prev[q].is_identity:
                prev[q], cur[q] = cell, GateCell.identity()
                moved = True
    return moved


def shift_gates_left(matrix: SolutionMatrix) -> SolutionMatrix:
    out = clone_solution(matrix)
    # every move lowers the summed column index of non-ID gates, so this ends
    while _shift_pass(out):
        pass
    return out


def drop_identity_columns(matrix: SolutionMatrix) -> SolutionMatrix:
    kept = [list(col) for col in matrix.columns if not all(cell.is_identity for cell in col)]
    if not kept:
        kept = [identity_column(matrix.num_qubits)]
    return SolutionMatrix(matrix.num_qubits, kept)


def compact(matrix: SolutionMatrix) -> SolutionMatrix:
    current = clone_solution(matrix)
    rounds = 0
    while True:
        rounds += 1
        nxt = drop_identity_columns(shift_gates_left(merge_rotations(current)))
        if nxt == current:
            break
        current = nxt
    if current.depth < matrix.depth:
        logger.debug("compacted depth %d -> %d in %d rounds", matrix.depth, current.depth, rounds)
    return current
