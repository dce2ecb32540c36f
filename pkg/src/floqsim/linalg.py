"""Small dense Hermitian linear algebra used to build gates and initial states.

Everything here runs in double precision on matrices of dimension 2**q with
q small (4x4 bond operators, occasionally fused blocks).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOND_DIM = 4
BOND_NORM = np.sqrt(2.0)
# Standard normals consumed per bond sample: 16 real + 16 imaginary parts.
DRAWS_PER_BOND = 2 * BOND_DIM * BOND_DIM


class NotHermitianError(ValueError):
    def __init__(self, asymmetry: float, scale: float):
        self.asymmetry = asymmetry
        super().__init__(
            f"matrix is not Hermitian: ||H - H^dag||_F = {asymmetry:.3e} "
            f"(||H||_F = {scale:.3e})"
        )


class DegenerateGroundStateError(ValueError):
    def __init__(self, e0: float, e1: float):
        self.eigenvalues = (e0, e1)
        super().__init__(
            f"ground space is (near-)degenerate: lambda_0 = {e0!r}, lambda_1 = {e1!r}"
        )


@dataclass
class SeededRng:
    """Counter-addressed Gaussian source.

    Stream position ``k`` always yields the same block of draws for a given
    seed (numpy ``SeedSequence(seed, spawn_key=(k,))`` feeding PCG64), so a
    sample taken at position k never depends on how many samples follow it.
    """

    seed: int
    position: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def normals(self, n: int) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.position,))
        self.position += 1
        return np.random.Generator(np.random.PCG64(ss)).standard_normal(n)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)


def check_hermitian(h: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = np.linalg.norm(h)
    asym = np.linalg.norm(h - h.conj().T)
    if asym > rtol * max(scale, np.finfo(float).tiny):
        raise NotHermitianError(asym, scale)
    return h


def sample_gue_bond(rng: SeededRng) -> np.ndarray:
    """Traceless Hermitian 4x4 matrix with Frobenius norm sqrt(2).

    Entries of the seed matrix A are standard complex normal (real and
    imaginary parts of variance 1/2); consumes one rng stream position.
    """
    x = rng.normals(DRAWS_PER_BOND).reshape(2, BOND_DIM, BOND_DIM)
    a = (x[0] + 1j * x[1]) / np.sqrt(2.0)
    h = (a + a.conj().T) / 2
    h -= np.trace(h) / BOND_DIM * np.eye(BOND_DIM)
    h *= BOND_NORM / np.linalg.norm(h)
    # Re-symmetrise so H == H^dag holds bit-exactly after the rescale.
    return (h + h.conj().T) / 2


def eigh(h: np.ndarray) -> EigenDecomposition:
    h = check_hermitian(h)
    w, v = np.linalg.eigh(h)
    return EigenDecomposition(w, v)


def expm_unitary(h: np.ndarray, theta: float) -> np.ndarray:
    """exp(-i theta H) via the eigendecomposition of H."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    dec = eigh(h)
    v = dec.eigenvectors
    return (v * np.exp(-1j * theta * dec.eigenvalues)) @ v.conj().T


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive.

    Ties on magnitude go to the lowest index (``argmax`` semantics).
    """
    i = int(np.argmax(np.abs(v)))
    out = v * (abs(v[i]) / v[i])
    out[i] = abs(v[i])  # exact, rounding can leave ~1e-17 imaginary residue
    return out


def ground_state(h: np.ndarray, min_gap: float = 1e-8) -> np.ndarray:
    dec = eigh(h)
    e0, e1 = dec.eigenvalues[:2]
    if e1 - e0 <= min_gap:
        raise DegenerateGroundStateError(float(e0), float(e1))
    v = dec.eigenvectors[:, 0]
    return fix_phase(v / np.linalg.norm(v))
