"""In-process stand-ins for the collectives shard workers may use.

Workers never touch each other's arrays except through these functions:
``allreduce_sum`` (fixed binary tree over shard index), ``exchange_halves``
(pairwise block swap between partner shards) and ``partner_update`` (a
group of 2**k partner shards jointly rewriting their blocks, used only
when a gate cannot be made local).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np


def allreduce_sum(partials: Sequence[complex]) -> complex:
    """Sum one value per shard in a fixed pairwise tree.

    Level by level, shard 2i absorbs shard 2i+1, so the floating-point
    association order depends only on the shard count.
    """
    vals = list(partials)
    if not vals:
        raise ValueError("allreduce over zero shards")
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def exchange_halves(shards: list, shard_bit: int, local_axis: int, num_local: int) -> None:
    """Swap the role of one shard-index bit and one local bit, in place.

    ``shard_bit`` counts from the most significant of the global bits
    (0-based) among ``num_global = log2(len(shards))``; ``local_axis`` is the
    0-based position inside the local index (0 = most significant).
    Shard s with that bit 0 trades its local-bit-1 half for its partner's
    local-bit-0 half; every shard moves exactly half its data.
    """
    num_global = len(shards).bit_length() - 1
    mask = 1 << (num_global - 1 - shard_bit)
    outer = 1 << local_axis
    inner = 1 << (num_local - 1 - local_axis)
    for s in range(len(shards)):
        if s & mask:
            continue
        lo = shards[s].reshape(outer, 2, inner)
        hi = shards[s | mask].reshape(outer, 2, inner)
        buf = lo[:, 1, :].copy()
        lo[:, 1, :] = hi[:, 0, :]
        hi[:, 0, :] = buf


def partner_update(shards: list, shard_bits: Sequence[int], update) -> None:
    """Let each group of shards differing only in ``shard_bits`` update jointly.

    ``shard_bits`` are 0-based from the most significant global bit. For each
    group, ``update`` receives a (2**k, local_len) stack whose row index spells
    the group bits in the given order (first bit most significant) and
    modifies it in place; the rows are then written back to their shards.
    """
    num_global = len(shards).bit_length() - 1
    masks = [1 << (num_global - 1 - b) for b in shard_bits]
    group_mask = sum(masks)
    k = len(masks)
    for base in range(len(shards)):
        if base & group_mask:
            continue
        members = []
        for c in range(1 << k):
            s = base
            for j, m in enumerate(masks):
                if (c >> (k - 1 - j)) & 1:
                    s |= m
            members.append(s)
        stack = np.stack([shards[m] for m in members])
        update(stack)
        for row, m in zip(stack, members):
            shards[m][...] = row


def partial_vdot(a: np.ndarray, b: np.ndarray) -> complex:
    """Per-shard <a|b> accumulated in double precision."""
    if a.dtype != np.complex128:
        a = a.astype(np.complex128)
    if b.dtype != np.complex128:
        b = b.astype(np.complex128)
    return complex(np.vdot(a, b))
