"""
Cost of one period
==================

A period touches every amplitude once per gate, and there are L-1 gates, so
the wall time should follow L 2**L. Gate fusion trades fewer passes over
memory for larger dense blocks.
"""

import math

from floqsim import benchmark_period

# At L = 12 the fixed Python overhead per gate still dominates.
rows = [benchmark_period(L, repetitions=20) for L in (12, 14, 16, 18, 20)]
c = math.exp(sum(math.log(r.mean_s / r.reference_cost) for r in rows) / len(rows))
print("  L   s/period   c*L*2^L   ratio")
for r in rows:
    print(f"{r.L:3d} {r.mean_s:10.4g} {c * r.reference_cost:9.4g} {r.mean_s / (c * r.reference_cost):7.2f}")

# %%
# Fusing gates into 4- or 6-qubit blocks at L = 18.
for q in (2, 4, 6):
    r = benchmark_period(18, fusion=q, repetitions=20)
    print(f"fusion window {q}: {r.mean_s:.4g} s/period (min {r.min_s:.4g}, max {r.max_s:.4g})")
