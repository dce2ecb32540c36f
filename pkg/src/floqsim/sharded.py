"""Full state vector split into 2**Ng shards by its leading (global) qubits.

Qubits are numbered 1..L with qubit 1 the most significant bit of the
amplitude index. Shard ``s`` holds every amplitude whose first Ng physical
bits spell ``s``; the remaining L - Ng bits index the shard's local array.

Global qubits are moved into local positions on demand by
``swap_global_local``. The state keeps a logical-to-physical qubit order
(``state.order[p]`` is the logical qubit at physical position ``p``) and
only restores the canonical order when something needs it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import collectives

PRECISIONS = {"single": np.complex64, "double": np.complex128}
UNITARY_TOL = {"single": 1e-5, "double": 1e-10}

_DUMP_HEADER = struct.Struct("<III")
_DUMP_TAGS = {"single": 1, "double": 2}
# amplitudes per kernel block
_CHUNK = 1 << 15


def _check_precision(precision: str) -> str:
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")
    return precision


@dataclass(frozen=True)
class ShardLayout:
    num_qubits: int
    num_global: int = 0

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits must be positive, got {self.num_qubits}")
        if not 0 <= self.num_global <= self.num_qubits:
            raise ValueError(
                f"num_global must satisfy 0 <= Ng <= L, got Ng={self.num_global}, "
                f"L={self.num_qubits}"
            )

    @property
    def num_local(self) -> int:
        return self.num_qubits - self.num_global

    @property
    def shard_count(self) -> int:
        return 1 << self.num_global

    @property
    def local_len(self) -> int:
        return 1 << self.num_local


@dataclass
class GateBlock:
    """A dense operator on an ordered list of (logical, 1-based) qubits.

    The first target is the most significant bit of the matrix index.
    ``unitary=False`` is used for Hamiltonian terms.
    """

    targets: tuple
    matrix: np.ndarray = field(repr=False)
    unitary: bool = True

    def __post_init__(self):
        self.targets = tuple(int(q) for q in self.targets)
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate gate targets {self.targets}")
        if any(q < 1 for q in self.targets):
            raise ValueError(f"qubit indices are 1-based, got {self.targets}")
        m = np.asarray(self.matrix)
        dim = 1 << len(self.targets)
        if m.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match {len(self.targets)} targets "
                f"(expected {(dim, dim)})"
            )
        self.matrix = m
        if self.unitary:
            tol = UNITARY_TOL["single" if m.dtype == np.complex64 else "double"]
            err = np.linalg.norm(m.conj().T @ m - np.eye(dim))
            if err > tol:
                raise ValueError(f"gate on {self.targets} is not unitary: ||U^dag U - I||_F = {err:.3e}")

    def dagger(self) -> "GateBlock":
        return GateBlock(self.targets, self.matrix.conj().T, self.unitary)


class ShardedState:
    def __init__(self, layout: ShardLayout, shards: list, precision: str = "single", order=None):
        self.layout = layout
        self.precision = _check_precision(precision)
        if len(shards) != layout.shard_count:
            raise ValueError(f"expected {layout.shard_count} shards, got {len(shards)}")
        dtype = PRECISIONS[precision]
        # always copies: a state never aliases caller-owned arrays
        self.shards = [np.array(s, dtype=dtype).reshape(layout.local_len) for s in shards]
        self.order = list(order) if order is not None else list(range(1, layout.num_qubits + 1))

    @classmethod
    def zeros(cls, layout: ShardLayout, precision: str = "single") -> "ShardedState":
        dtype = PRECISIONS[_check_precision(precision)]
        return cls(layout, [np.zeros(layout.local_len, dtype) for _ in range(layout.shard_count)], precision)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def num_qubits(self) -> int:
        return self.layout.num_qubits

    def copy(self) -> "ShardedState":
        return ShardedState(self.layout, self.shards, self.precision, self.order)

    def zeros_like(self) -> "ShardedState":
        out = ShardedState.zeros(self.layout, self.precision)
        out.order = list(self.order)
        return out

    def copy_from(self, other: "ShardedState") -> None:
        """Overwrite this state's data with ``other`` (same layout), reusing buffers."""
        _check_layouts(self, other)
        for dst, src in zip(self.shards, other.shards):
            dst[...] = src
        self.order = list(other.order)

    def astype(self, precision: str) -> "ShardedState":
        return ShardedState(self.layout, self.shards, precision, self.order)

    def __repr__(self):
        return (f"ShardedState(L={self.layout.num_qubits}, Ng={self.layout.num_global}, "
                f"precision={self.precision!r}, order={self.order})")


def _check_layouts(a: ShardedState, b: ShardedState) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: {a.layout} vs {b.layout}")


def _parse_bits(bits, n: int) -> list:
    if isinstance(bits, str):
        vals = [int(c) for c in bits]
    else:
        vals = [int(b) for b in bits]
    if len(vals) != n:
        raise ValueError(f"bitstring has length {len(vals)}, expected L={n}")
    if any(v not in (0, 1) for v in vals):
        raise ValueError(f"bitstring must contain only 0/1, got {bits!r}")
    return vals


def make_basis_state(layout: ShardLayout, bits, precision: str = "single") -> ShardedState:
    vals = _parse_bits(bits, layout.num_qubits)
    state = ShardedState.zeros(layout, precision)
    ng = layout.num_global
    shard = int("".join(map(str, vals[:ng])) or "0", 2)
    local = int("".join(map(str, vals[ng:])) or "0", 2)
    state.shards[shard][local] = 1
    return state


def make_product_state(layout: ShardLayout, factors: Sequence, precision: str = "single",
                       tol: float = 1e-6) -> ShardedState:
    """Product of two-qubit factors on pairs (1,2), (3,4), ..., (L-1, L)."""
    L, ng = layout.num_qubits, layout.num_global
    if L % 2:
        raise ValueError(f"product state needs even L, got L={L}")
    factors = [np.asarray(f, dtype=np.complex128).reshape(-1) for f in factors]
    if len(factors) != L // 2:
        raise ValueError(f"expected {L // 2} pair factors, got {len(factors)}")
    for j, f in enumerate(factors):
        if f.shape != (4,):
            raise ValueError(f"factor {j} must be a 4-vector, got shape {f.shape}")
        dev = abs(np.linalg.norm(f) - 1)
        if dev > tol:
            raise ValueError(f"factor {j} on qubits ({2 * j + 1}, {2 * j + 2}) is not unit norm (deviation {dev:.3e})")

    shards = []
    for s in range(layout.shard_count):
        gbits = [(s >> (ng - 1 - i)) & 1 for i in range(ng)]
        vec = np.ones(1, dtype=np.complex128)
        for j, f in enumerate(factors):
            q1 = 2 * j  # 0-based position of the pair's first qubit
            if q1 + 1 < ng:
                vec = vec * f[2 * gbits[q1] + gbits[q1 + 1]]
            elif q1 < ng:
                vec = np.kron(vec, f[2 * gbits[q1]: 2 * gbits[q1] + 2])
            else:
                vec = np.kron(vec, f)
        shards.append(vec)
    return ShardedState(layout, shards, precision)


def _apply_local(arr: np.ndarray, u: np.ndarray, axes: Sequence[int], n: int) -> None:
    """Apply ``u`` in place to bit positions ``axes`` (0 = MSB) of a 2**n array."""
    k = len(axes)
    if list(axes) == list(range(axes[0], axes[0] + k)):
        _apply_contiguous(arr.reshape(1 << axes[0], 1 << k, -1), u)
        return
    t = arr.reshape((2,) * n)
    ut = u.reshape((2,) * (2 * k))
    res = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(axes)))
    t[...] = np.moveaxis(res, list(range(k)), list(axes))


def _apply_contiguous(a3: np.ndarray, u: np.ndarray) -> None:
    # a3 is (outer, 2**k, inner); work in cache-sized blocks so each gate
    # streams the array through memory once.
    outer, dim, inner = a3.shape
    if inner * dim >= _CHUNK:
        step = _CHUNK // dim
        for a in range(outer):
            row = a3[a]
            for b0 in range(0, inner, step):
                blk = row[:, b0:b0 + step]
                blk[...] = u @ blk
        return
    rows = max(1, _CHUNK // (dim * inner))
    for a0 in range(0, outer, rows):
        blk = a3[a0:a0 + rows]
        if inner >= 16:
            blk[...] = np.matmul(u, blk)
        else:
            blk[...] = np.tensordot(blk, u, axes=(1, 1)).transpose(0, 2, 1)


def swap_global_local(state: ShardedState, pairs: Iterable) -> ShardedState:
    """Exchange physical global positions with local ones (1-based positions).

    A pure data-movement collective; the logical amplitudes are unchanged
    because ``state.order`` is updated alongside.
    """
    L, ng = state.layout.num_qubits, state.layout.num_global
    norm_pairs = []
    seen = set()
    for pair in pairs:
        a, b = (int(x) for x in pair)
        if not (1 <= a <= L and 1 <= b <= L):
            raise ValueError(f"swap pair {pair} out of range 1..{L}")
        g, l = (a, b) if a <= ng else (b, a)
        if not (g <= ng < l):
            raise ValueError(f"swap pair {pair} must join a global (<= {ng}) and a local (> {ng}) position")
        if g in seen or l in seen:
            raise ValueError(f"swap pairs are not disjoint at {pair}")
        seen.update((g, l))
        norm_pairs.append((g, l))
    for g, l in norm_pairs:
        collectives.exchange_halves(state.shards, g - 1, l - 1 - ng, state.layout.num_local)
        state.order[g - 1], state.order[l - 1] = state.order[l - 1], state.order[g - 1]
    return state


def align_order(state: ShardedState, target: Sequence[int]) -> ShardedState:
    """Move data so ``state.order == target``; the logical state is unchanged."""
    L, ng = state.layout.num_qubits, state.layout.num_global
    target = list(target)
    if sorted(target) != list(range(1, L + 1)):
        raise ValueError(f"target order {target} is not a permutation of 1..{L}")
    if state.order == target:
        return state
    want_global = set(target[:ng])
    incoming = [q for q in target[:ng] if state.order.index(q) >= ng]
    outgoing = [q for q in state.order[:ng] if q not in want_global]
    if incoming:
        swap_global_local(state, [(state.order.index(o) + 1, state.order.index(i) + 1)
                                  for o, i in zip(outgoing, incoming)])
    cur = state.order
    if cur[:ng] != target[:ng]:
        src_pos = [cur.index(q) for q in target[:ng]]
        old = state.shards
        new = []
        for s_new in range(len(old)):
            s_old = 0
            for j, p in enumerate(src_pos):
                if (s_new >> (ng - 1 - j)) & 1:
                    s_old |= 1 << (ng - 1 - p)
            new.append(old[s_old])
        state.shards = new
        cur[:ng] = target[:ng]
    if cur[ng:] != target[ng:]:
        perm = [cur.index(q) - ng for q in target[ng:]]
        nl = state.layout.num_local
        state.shards = [np.ascontiguousarray(np.transpose(s.reshape((2,) * nl), perm)).reshape(-1)
                        for s in state.shards]
        cur[ng:] = target[ng:]
    return state


def canonicalize(state: ShardedState) -> ShardedState:
    return align_order(state, range(1, state.layout.num_qubits + 1))


def apply_gate(state: ShardedState, gate: GateBlock, avoid: Iterable[int] = ()) -> ShardedState:
    """Apply a gate in place.

    Targets sitting on global positions are first swapped with free local
    positions; the permuted order is kept afterwards. ``avoid`` lists logical
    qubits that should not be pushed out to global positions if there is a
    choice (e.g. targets of the remaining gates in the same layer).
    """
    L, ng = state.layout.num_qubits, state.layout.num_global
    if any(q > L for q in gate.targets):
        raise ValueError(f"gate targets {gate.targets} out of range for L={L}")
    pos = [state.order.index(q) for q in gate.targets]
    glob = [p for p in pos if p < ng]
    if glob:
        avoid = set(avoid)
        free = [p for p in range(L - 1, ng - 1, -1) if state.order[p] not in gate.targets]
        free.sort(key=lambda p: state.order[p] in avoid)
        swap_global_local(state, [(g + 1, l + 1) for g, l in zip(glob, free)])
        pos = [state.order.index(q) for q in gate.targets]
    u = np.asarray(gate.matrix, dtype=state.dtype)
    n = state.layout.num_local
    stuck = sorted(p for p in pos if p < ng)
    if stuck:
        # too few local qubits (Ng close to L): partner shards update jointly
        axes = [stuck.index(p) if p < ng else len(stuck) + p - ng for p in pos]
        width = len(stuck) + n
        collectives.partner_update(state.shards, stuck,
                                   lambda stack: _apply_local(stack.reshape(-1), u, axes, width))
        return state
    axes = [p - ng for p in pos]
    for shard in state.shards:
        _apply_local(shard, u, axes, n)
    return state


def apply_layer(state: ShardedState, gates: Sequence[GateBlock]) -> ShardedState:
    for i, g in enumerate(gates):
        rest = {q for h in gates[i + 1:] for q in h.targets}
        apply_gate(state, g, avoid=rest)
    return state


def inner_product(psi: ShardedState, phi: ShardedState) -> complex:
    """<psi|phi>: per-shard double-precision partials, then a tree all-reduce.

    If the qubit orders differ, ``phi`` is realigned to ``psi`` in place.
    """
    _check_layouts(psi, phi)
    if psi.order != phi.order:
        align_order(phi, psi.order)
    return collectives.allreduce_sum(
        [collectives.partial_vdot(a, b) for a, b in zip(psi.shards, phi.shards)])


def norm(state: ShardedState) -> float:
    return float(np.sqrt(inner_product(state, state).real))


def axpy(out: ShardedState, alpha: complex, x: ShardedState) -> ShardedState:
    """out <- out + alpha * x, shard by shard."""
    _check_layouts(out, x)
    if out.order != x.order:
        align_order(x, out.order)
    if alpha == 0:
        return out
    a = out.dtype(alpha)
    for o, s in zip(out.shards, x.shards):
        o += a * s
    return out


def scale(state: ShardedState, alpha: complex) -> ShardedState:
    for s in state.shards:
        s *= alpha
    return state


def to_dense(state: ShardedState) -> np.ndarray:
    """Full amplitude vector in canonical logical order (does not modify state)."""
    L = state.layout.num_qubits
    flat = np.concatenate(state.shards) if len(state.shards) > 1 else state.shards[0]
    t = flat.reshape((2,) * L)
    return np.transpose(t, [state.order.index(q) for q in range(1, L + 1)]).reshape(-1).copy()


def from_dense(layout: ShardLayout, vec: np.ndarray, precision: str = "single") -> ShardedState:
    vec = np.asarray(vec).reshape(-1)
    if vec.size != 1 << layout.num_qubits:
        raise ValueError(f"dense vector has {vec.size} entries, expected 2**{layout.num_qubits}")
    return ShardedState(layout, list(vec.reshape(layout.shard_count, layout.local_len)), precision)


def amplitude(state: ShardedState, bits) -> complex:
    vals = _parse_bits(bits, state.layout.num_qubits)
    phys = [vals[q - 1] for q in state.order]
    ng = state.layout.num_global
    shard = int("".join(map(str, phys[:ng])) or "0", 2)
    local = int("".join(map(str, phys[ng:])) or "0", 2)
    return complex(state.shards[shard][local])


def dump_amplitudes(state: ShardedState, path) -> None:
    """Little-endian dump: (L, Ng, precision tag) as u32, then 2**L amplitudes."""
    dense = to_dense(state)
    dt = np.dtype("<c8") if state.precision == "single" else np.dtype("<c16")
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(state.layout.num_qubits, state.layout.num_global,
                                   _DUMP_TAGS[state.precision]))
        fh.write(dense.astype(dt).tobytes())


def load_amplitudes(path) -> ShardedState:
    with open(path, "rb") as fh:
        raw = fh.read()
    L, ng, tag = _DUMP_HEADER.unpack_from(raw)
    precision = {v: k for k, v in _DUMP_TAGS.items()}.get(tag)
    if precision is None:
        raise ValueError(f"{path}: unknown precision tag {tag}")
    dt = np.dtype("<c8") if precision == "single" else np.dtype("<c16")
    vec = np.frombuffer(raw, dtype=dt, offset=_DUMP_HEADER.size)
    if vec.size != 1 << L:
        raise ValueError(f"{path}: expected 2**{L} amplitudes, found {vec.size}")
    return from_dense(ShardLayout(L, ng), vec, precision)
