"""Random two-layer Floquet circuit on an open chain of L qubits.

Bond k couples qubits (k, k+1) through a traceless GUE Hamiltonian H_k with
Frobenius norm sqrt(2). Each period applies exp(-i H_k T) on the even bonds
first and then on the odd bonds. The energy observable is the bond sum
Hbar = sum_k H_k.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .fusion import fuse_layer
from .sharded import (GateBlock, ShardedState, ShardLayout, apply_gate, apply_layer,
                      axpy, inner_product, make_product_state)

log = logging.getLogger(__name__)

_PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
           np.diag([1.0, -1.0])]


@dataclass(frozen=True)
class BondHamiltonian:
    bond: int
    matrix: np.ndarray = field(repr=False)

    @property
    def qubits(self) -> tuple:
        return (self.bond, self.bond + 1)

    def norm_split(self) -> tuple:
        """Frobenius norms of the single-qubit and two-qubit Pauli pieces."""
        single = inter = 0.0
        for a in range(4):
            for b in range(4):
                if a == b == 0:
                    continue
                p = np.kron(_PAULIS[a], _PAULIS[b])
                c2 = abs(np.trace(p @ self.matrix)) ** 2 / 4  # |coef|^2 * ||P||_F^2
                if a == 0 or b == 0:
                    single += c2
                else:
                    inter += c2
        return float(np.sqrt(single)), float(np.sqrt(inter))


@dataclass(frozen=True)
class EnsembleSpec:
    seed: int
    max_bonds: int
    bonds: tuple = field(repr=False)

    def digest(self) -> str:
        h = hashlib.sha256()
        for b in self.bonds:
            h.update(np.ascontiguousarray(b.matrix, dtype="<c16").tobytes())
        return h.hexdigest()

    def manifest(self) -> dict:
        return {"seed": self.seed, "max_bonds": self.max_bonds, "sha256": self.digest()}


def build_ensemble(seed: int, max_bonds: int) -> EnsembleSpec:
    if max_bonds < 1:
        raise ValueError(f"max_bonds must be >= 1, got {max_bonds}")
    rng = linalg.SeededRng(seed)
    bonds = []
    for k in range(1, max_bonds + 1):
        b = BondHamiltonian(k, linalg.sample_gue_bond(rng))
        single, inter = b.norm_split()
        log.debug("bond %d: single-qubit norm %.3f, interacting norm %.3f", k, single, inter)
        bonds.append(b)
    return EnsembleSpec(seed, max_bonds, tuple(bonds))


@dataclass
class FloquetCircuit:
    num_qubits: int
    period: float
    bonds: list = field(repr=False)
    even_layer: list = field(repr=False)
    odd_layer: list = field(repr=False)
    fusion: int = 2
    gates: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.gates is None:
            self.gates = fuse_layer(self.even_layer + self.odd_layer, self.fusion)
        self.hamiltonian_terms = [GateBlock(b.qubits, b.matrix, unitary=False) for b in self.bonds]
        self.inverse_gates = [g.dagger() for g in reversed(self.gates)]

    @property
    def omega(self) -> float:
        return 2 * np.pi / self.period

    @property
    def gates_per_period(self) -> int:
        return self.num_qubits - 1


def build_circuit(ensemble: EnsembleSpec, L: int, omega: float, fusion: int = 2) -> FloquetCircuit:
    if L % 2:
        raise ValueError(f"the Floquet circuit is defined for even L only, got L={L}")
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if L - 1 > ensemble.max_bonds:
        raise ValueError(f"L={L} needs {L - 1} bonds but the ensemble only has {ensemble.max_bonds}")
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    period = 2 * np.pi / omega
    bonds = list(ensemble.bonds[:L - 1])
    gates = {b.bond: GateBlock(b.qubits, linalg.expm_unitary(b.matrix, period)) for b in bonds}
    even = [gates[k] for k in range(2, L - 1, 2)]
    odd = [gates[k] for k in range(1, L, 2)]
    return FloquetCircuit(L, period, bonds, even, odd, fusion)


def floquet_step(state: ShardedState, circuit: FloquetCircuit, periods: int = 1,
                 inverse: bool = False) -> ShardedState:
    """Apply U_F (or U_F^dagger) ``periods`` times in place."""
    gates = circuit.inverse_gates if inverse else circuit.gates
    for _ in range(periods):
        apply_layer(state, gates)
    return state


def initial_state(circuit: FloquetCircuit, layout: ShardLayout, precision: str = "single") -> ShardedState:
    """Product of the two-qubit ground states of the odd bonds."""
    if layout.num_qubits != circuit.num_qubits:
        raise ValueError(f"layout has L={layout.num_qubits}, circuit has L={circuit.num_qubits}")
    factors = [linalg.ground_state(b.matrix) for b in circuit.bonds if b.bond % 2 == 1]
    return make_product_state(layout, factors, precision)


def apply_hbar(psi: ShardedState, circuit: FloquetCircuit, out: ShardedState = None,
               scratch: ShardedState = None) -> ShardedState:
    """out = Hbar psi, built bond by bond in one scratch state; psi is left as is."""
    if out is None:
        out = psi.zeros_like()
    else:
        for s in out.shards:
            s[...] = 0
        out.order = list(psi.order)
    if scratch is None:
        scratch = psi.zeros_like()
    for term in circuit.hamiltonian_terms:
        scratch.copy_from(psi)
        apply_gate(scratch, term)
        axpy(out, 1.0, scratch)
    return out


def energy_and_variance(psi: ShardedState, circuit: FloquetCircuit, out: ShardedState = None,
                        scratch: ShardedState = None) -> tuple:
    phi = apply_hbar(psi, circuit, out, scratch)
    energy = inner_product(psi, phi).real
    var = inner_product(phi, phi).real - energy ** 2
    if var < 0:
        log.info("clamped negative energy variance %.3e to zero", var)
        var = 0.0
    return float(energy), float(np.sqrt(var))


def _reduce(h: np.ndarray, keep: int) -> np.ndarray:
    t = h.reshape(2, 2, 2, 2)
    return np.einsum("ajbj->ab", t) if keep == 0 else np.einsum("jajb->ab", t)


def infinite_temperature_sigma(circuit: FloquetCircuit) -> float:
    """sqrt(tr(Hbar^2) / 2**L) from local partial traces, valid for any L.

    Diagonal bond terms give ||H_k||_F^2 / 4; only neighbouring bonds
    overlap, contributing 2 tr(tr_1[H_k] tr_2[H_{k+1}]) / 8.
    """
    total = sum(np.linalg.norm(b.matrix) ** 2 / 4 for b in circuit.bonds)
    for left, right in zip(circuit.bonds, circuit.bonds[1:]):
        total += 2 * np.trace(_reduce(left.matrix, 1) @ _reduce(right.matrix, 0)).real / 8
    return float(np.sqrt(total))
