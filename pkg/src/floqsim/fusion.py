"""Merge runs of consecutive gates into dense blocks on contiguous qubit windows."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .sharded import GateBlock, _apply_local

MIN_WINDOW, MAX_WINDOW = 2, 12


def lift(gate: GateBlock, window: Sequence[int]) -> np.ndarray:
    """Dense matrix of ``gate`` acting inside ``window`` (ordered qubit list)."""
    w = len(window)
    m = np.eye(1 << w, dtype=np.complex128)
    _compose(m, gate, list(window))
    return m


def _compose(m: np.ndarray, gate: GateBlock, window: list) -> None:
    # m <- lift(gate) @ m; rows of m are the window's w-qubit index
    w = len(window)
    axes = [window.index(q) for q in gate.targets]
    _apply_local(m.reshape(-1), np.asarray(gate.matrix, dtype=np.complex128), axes, 2 * w)


def _merge(block: list, window: range) -> GateBlock:
    qubits = list(window)
    m = np.eye(1 << len(qubits), dtype=np.complex128)
    for g in block:
        _compose(m, g, qubits)
    return GateBlock(tuple(qubits), m, unitary=all(g.unitary for g in block))


def fuse_layer(gates: Sequence[GateBlock], window: int = 2) -> list:
    """Greedily fuse consecutive gates whose combined span fits ``window`` qubits.

    Gate order is preserved: each output block is the product of a run of
    consecutive input gates, so the fused list is exactly equivalent. With
    ``window == 2`` fusion is disabled and the input is returned unchanged.
    """
    if not MIN_WINDOW <= window <= MAX_WINDOW:
        raise ValueError(f"fusion window must be in [{MIN_WINDOW}, {MAX_WINDOW}], got {window}")
    gates = list(gates)
    if window == MIN_WINDOW:
        return gates
    out = []
    run: list = []
    lo = hi = 0
    for g in gates:
        glo, ghi = min(g.targets), max(g.targets)
        if run and max(hi, ghi) - min(lo, glo) + 1 <= window:
            run.append(g)
            lo, hi = min(lo, glo), max(hi, ghi)
            continue
        if run:
            out.append(run[0] if len(run) == 1 else _merge(run, range(lo, hi + 1)))
        run, lo, hi = [g], glo, ghi
    if run:
        out.append(run[0] if len(run) == 1 else _merge(run, range(lo, hi + 1)))
    return out
