"""Heating runs, thermalization-rate extraction, echo audits and timing."""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .model import (FloquetCircuit, build_circuit, build_ensemble, energy_and_variance,
                    floquet_step, initial_state)
from .sharded import PRECISIONS, ShardLayout, ShardedState, inner_product, norm

log = logging.getLogger(__name__)

NORM_ABORT = 1e-2
DEFAULT_MAX_BONDS = 39


class NormDriftError(RuntimeError):
    """Raised when |psi| leaves 1 by more than NORM_ABORT; carries the partial series."""

    def __init__(self, message: str, series: "ObservableSeries"):
        super().__init__(message)
        self.series = series


class NotThermalizedError(RuntimeError):
    pass


class NonMonotoneCrossingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HeatingConfig:
    L: int
    omega: float
    seed: int = 0
    num_global: int = 0
    t_max: float = 0.0
    t_dense: float = 100.0
    stride: int = 10
    precision: str = "single"
    fusion: int = 2
    max_bonds: int = DEFAULT_MAX_BONDS
    # stop at the first record with E/E(0) at or below this ratio
    stop_ratio: Optional[float] = None

    def __post_init__(self):
        if self.t_max < 0 or self.t_dense < 0:
            raise ValueError(f"t_max and t_dense must be >= 0 (got {self.t_max}, {self.t_dense})")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be 'single' or 'double', got {self.precision!r}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega


@dataclass(frozen=True)
class Record:
    n: int
    t: float
    energy: float
    sigma: float
    norm: float
    gates: int


@dataclass
class ObservableSeries:
    records: list
    manifest: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def energy(self) -> np.ndarray:
        return self.column("energy")

    @property
    def sigma(self) -> np.ndarray:
        return self.column("sigma")

    def __len__(self):
        return len(self.records)


def _floor(x: float) -> int:
    # tolerate t/T landing a hair below an integer
    return int(math.floor(x + 1e-9))


def record_schedule(period: float, t_max: float, t_dense: float = 100.0, stride: int = 10) -> list:
    """Period indices at which observables are recorded.

    Every period up to t_dense, then every ``stride``-th period up to t_max.
    """
    n_dense = _floor(min(t_dense, t_max) / period)
    n_sparse = _floor(max(0.0, t_max - t_dense) / (stride * period))
    return list(range(n_dense + 1)) + [n_dense + stride * j for j in range(1, n_sparse + 1)]


def _setup(config: HeatingConfig, ensemble=None):
    if ensemble is None:
        ensemble = build_ensemble(config.seed, max(config.max_bonds, config.L - 1))
    circuit = build_circuit(ensemble, config.L, config.omega, config.fusion)
    layout = ShardLayout(config.L, config.num_global)
    return ensemble, circuit, layout


def run_manifest(config, ensemble) -> dict:
    return {
        "heating": asdict(config),
        "ensemble": ensemble.manifest(),
        "precision": config.precision,
        "software_version": __version__,
    }


def run_heating(config: HeatingConfig, ensemble=None) -> ObservableSeries:
    """Evolve the initial product state and record E, sigma_E and the norm.

    Uses the primary state plus two scratch states.
    """
    started = time.perf_counter()
    ensemble, circuit, layout = _setup(config, ensemble)
    psi = initial_state(circuit, layout, config.precision)
    phi, scratch = psi.zeros_like(), psi.zeros_like()
    series = ObservableSeries([], run_manifest(config, ensemble))
    e0 = None
    n_done = 0
    for n in record_schedule(circuit.period, config.t_max, config.t_dense, config.stride):
        floquet_step(psi, circuit, n - n_done)
        n_done = n
        nrm = norm(psi)
        if abs(nrm - 1) > NORM_ABORT:
            series.manifest["aborted_at_period"] = n
            raise NormDriftError(f"norm drifted to {nrm:.6f} at period {n}", series)
        energy, sigma = energy_and_variance(psi, circuit, phi, scratch)
        series.records.append(Record(n, n * circuit.period, energy, sigma, nrm, circuit.gates_per_period * n))
        if e0 is None:
            e0 = energy
        elif config.stop_ratio is not None and energy / e0 <= config.stop_ratio:
            break
    series.manifest["wall_time_s"] = time.perf_counter() - started
    return series


def _crossing_time(t: np.ndarray, ratio: np.ndarray, level: float) -> float:
    below = np.nonzero(ratio <= level)[0]
    if below.size == 0:
        raise NotThermalizedError(
            f"E(t)/E(0) never reaches {level:.4f} (minimum {ratio.min():.4f} by t={t[-1]:g})")
    i = int(below[0])
    if i == 0:
        return float(t[0])
    if np.any(ratio[i:] > level):
        warnings.warn(f"E(t)/E(0) re-crosses {level:.4f} after t={t[i]:g}; using the first crossing",
                      NonMonotoneCrossingWarning, stacklevel=3)
    ta, tb, ra, rb = t[i - 1], t[i], ratio[i - 1], ratio[i]
    frac = (level - ra) / (rb - ra)
    if ta <= 0:
        return float(ta + frac * (tb - ta))
    return float(math.exp(math.log(ta) + frac * (math.log(tb) - math.log(ta))))


def threshold_times(t, energy, levels=(1, 2)) -> list:
    t = np.asarray(t, dtype=float)
    ratio = np.asarray(energy, dtype=float) / energy[0]
    return [_crossing_time(t, ratio, math.exp(-k)) for k in levels]


def extract_rate(series) -> float:
    """Gamma = 1 / (t2 - t1) with E(t_k) = E(0) exp(-k).

    Crossing times are interpolated linearly in log t between records.
    Accepts an ObservableSeries or a ``(t, E)`` pair.
    """
    if isinstance(series, ObservableSeries):
        t, energy = series.t, series.energy
    else:
        t, energy = series
    t1, t2 = threshold_times(t, energy)
    if t2 <= t1:
        raise NotThermalizedError(f"degenerate crossing times t1={t1}, t2={t2}")
    return 1.0 / (t2 - t1)


@dataclass
class RateFit:
    """Unweighted OLS fit of ln Gamma = a * omega + b.

    ``stderr_a`` and ``stderr_b`` are the usual OLS standard errors from the
    residual variance.
    """

    points: list
    excluded: tuple
    a: float
    b: float
    stderr_a: float
    stderr_b: float
    rss: float
    r_squared: float

    def predict(self, omega):
        return np.exp(self.a * np.asarray(omega) + self.b)


def fit_rates(points: Sequence, exclude: Sequence[int] = ()) -> RateFit:
    points = [(float(w), float(g)) for w, g in points]
    exclude = tuple(sorted(set(int(i) for i in exclude)))
    bad = [i for i in exclude if not 0 <= i < len(points)]
    if bad:
        raise ValueError(f"exclude indices {bad} out of range for {len(points)} points")
    kept = [p for i, p in enumerate(points) if i not in exclude]
    if len(kept) < 3:
        raise ValueError(f"need at least 3 fitted points, got {len(kept)}")
    nonpos = [p for p in kept if not p[1] > 0]
    if nonpos:
        raise ValueError(f"rates must be positive, got {nonpos}")
    x = np.array([p[0] for p in kept])
    y = np.log([p[1] for p in kept])
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("all fitted points share the same omega")
    a = np.sum((x - xm) * (y - ym)) / sxx
    b = ym - a * xm
    resid = y - (a * x + b)
    rss = float(np.sum(resid ** 2))
    s2 = rss / (n - 2) if n > 2 else 0.0
    syy = np.sum((y - ym) ** 2)
    r2 = 1.0 - rss / syy if syy > 0 else 1.0
    return RateFit(points, exclude, float(a), float(b), float(np.sqrt(s2 / sxx)),
                   float(np.sqrt(s2 * (1 / n + xm ** 2 / sxx))), rss, float(r2))


@dataclass
class EchoReport:
    t_f: float
    periods: int
    overlap_error: float
    energy_rel_error: float
    sigma_rel_error: float
    precision: str


def _periods_for(t_f: float, period: float) -> int:
    n = int(round(t_f / period))
    if abs(n * period - t_f) > 1e-9 * max(1.0, abs(t_f)):
        raise ValueError(f"t_f={t_f} is not a multiple of the period T={period}")
    if n < 0:
        raise ValueError(f"t_f must be >= 0, got {t_f}")
    return n


def echo_state(psi0: ShardedState, circuit: FloquetCircuit, periods: int) -> ShardedState:
    """U_F^dagger^n U_F^n psi0 (a new state)."""
    psi = psi0.copy()
    floquet_step(psi, circuit, periods)
    floquet_step(psi, circuit, periods, inverse=True)
    return psi


def run_echo(config: HeatingConfig, t_f: float, ensemble=None) -> EchoReport:
    ensemble, circuit, layout = _setup(config, ensemble)
    n = _periods_for(t_f, circuit.period)
    psi0 = initial_state(circuit, layout, config.precision)
    psi1 = echo_state(psi0, circuit, n)
    nrm = norm(psi1)
    if abs(nrm - 1) > NORM_ABORT:
        raise NormDriftError(f"echo state norm drifted to {nrm:.6f}", ObservableSeries([]))
    e0, s0 = energy_and_variance(psi0, circuit)
    e1, s1 = energy_and_variance(psi1, circuit)
    # relative to <psi0|psi0> so that rounding of the cast initial state is not
    # counted as echo error; no evolution then gives exactly zero
    overlap = inner_product(psi0, psi1) / inner_product(psi0, psi0).real
    return EchoReport(t_f, n, abs(1 - overlap), abs(e1 - e0) / abs(e0),
                      abs(s1 - s0) / abs(s0) if s0 else abs(s1 - s0), config.precision)


def precision_fidelity_error(config: HeatingConfig, periods: int, ensemble=None) -> float:
    """|1 - <psi_double(nT)|psi_single(nT)>| for direct forward runs.

    Double-precision evolution is the reference; the single-precision state
    is promoted before the overlap.
    """
    ensemble, circuit, layout = _setup(config, ensemble)
    ref = initial_state(circuit, layout, "double")
    low = initial_state(circuit, layout, "single")
    floquet_step(ref, circuit, periods)
    floquet_step(low, circuit, periods)
    return abs(1 - inner_product(ref, low.astype("double")))


@dataclass
class BenchmarkResult:
    L: int
    num_global: int
    fusion: int
    repetitions: int
    mean_s: float
    min_s: float
    max_s: float
    total_s: float

    @property
    def reference_cost(self) -> float:
        return self.L * 2.0 ** self.L


def benchmark_period(L: int, num_global: int = 0, fusion: int = 2, repetitions: int = 100,
                     precision: str = "single", seed: int = 0, omega: float = 8.0) -> BenchmarkResult:
    """Wall time of one application of U_F, from ``repetitions`` successive periods."""
    if repetitions < 10:
        raise ValueError(f"repetitions must be >= 10, got {repetitions}")
    config = HeatingConfig(L=L, omega=omega, seed=seed, num_global=num_global,
                           precision=precision, fusion=fusion)
    _, circuit, layout = _setup(config)
    psi = initial_state(circuit, layout, precision)
    floquet_step(psi, circuit)  # warm-up; settles the qubit order when Ng > 0
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        floquet_step(psi, circuit)
        times.append(time.perf_counter() - t0)
    total = float(sum(times))
    return BenchmarkResult(L, num_global, fusion, repetitions, total / repetitions,
                           float(min(times)), float(max(times)), total)
