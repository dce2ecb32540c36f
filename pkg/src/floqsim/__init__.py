"""Sharded state-vector simulation of random Floquet qubit chains."""

__version__ = "0.1.0"

from .linalg import SeededRng, eigh, expm_unitary, ground_state, sample_gue_bond  # noqa: E402
from .sharded import (GateBlock, ShardedState, ShardLayout, amplitude, apply_gate,  # noqa: E402
                      apply_layer, axpy, canonicalize, inner_product, make_basis_state,
                      make_product_state, norm, swap_global_local, to_dense)
from .fusion import fuse_layer  # noqa: E402
from .model import (build_circuit, build_ensemble, apply_hbar, energy_and_variance,  # noqa: E402
                    floquet_step, infinite_temperature_sigma, initial_state)
from .experiments import (HeatingConfig, benchmark_period, extract_rate, fit_rates,  # noqa: E402
                          run_echo, run_heating)
