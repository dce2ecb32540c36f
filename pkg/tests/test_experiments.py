import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from floqsim.experiments import (HeatingConfig, NonMonotoneCrossingWarning, NormDriftError,
                                 NotThermalizedError, ObservableSeries, Record, benchmark_period,
                                 extract_rate, fit_rates, record_schedule, run_echo, run_heating,
                                 threshold_times)
from floqsim.model import build_circuit, build_ensemble, energy_and_variance, initial_state
from floqsim.sharded import GateBlock, ShardLayout
import floqsim.experiments as experiments


def test_schedule_count():
    T = 2 * math.pi / 8
    n = record_schedule(T, 1000.0, 100.0, 10)
    assert len(n) == math.floor(100 / T) + math.floor(900 / (10 * T)) + 1
    assert n[:3] == [0, 1, 2]
    assert np.all(np.diff(n[math.floor(100 / T):]) == 10)


@settings(max_examples=100)
@given(omega=st.floats(0.5, 20), t_dense=st.floats(0, 300), extra=st.floats(0, 3000),
       stride=st.integers(1, 50))
def test_schedule_count_property(omega, t_dense, extra, stride):
    T = 2 * math.pi / omega
    t_max = t_dense + extra
    n = record_schedule(T, t_max, t_dense, stride)
    expected = math.floor(t_dense / T + 1e-9) + math.floor(extra / (stride * T) + 1e-9) + 1
    assert len(n) == expected
    assert n == sorted(set(n)) and n[0] == 0
    assert n[-1] * T <= t_max + 1e-6


def test_gate_count_at_reference_scale():
    # 33 bonds per period, omega = 8, t = 1e5 -> about 4.2e6 two-qubit gates
    L, omega, t = 34, 8.0, 1e5
    gates = (L - 1) * t / (2 * math.pi / omega)
    assert gates == pytest.approx(4.2e6, rel=0.01)


def test_t_max_zero_is_single_record(ensemble):
    cfg = HeatingConfig(L=6, omega=4.0)
    series = run_heating(cfg, ensemble)
    assert len(series) == 1 and series.records[0].n == 0
    c = build_circuit(ensemble, 6, 4.0)
    e0, _ = energy_and_variance(initial_state(c, ShardLayout(6, 0)), c)
    assert series.records[0].energy == e0


def test_heating_is_deterministic(ensemble):
    cfg = HeatingConfig(L=8, omega=3.0, t_max=40.0, t_dense=20.0, stride=3, num_global=2)
    a = run_heating(cfg, ensemble)
    b = run_heating(cfg, ensemble)
    assert a.records == b.records
    assert a.records[-1].gates == 7 * a.records[-1].n


@pytest.mark.parametrize("ng", [1, 3])
def test_heating_shard_invariant(ensemble, ng):
    base = run_heating(HeatingConfig(L=8, omega=3.0, t_max=30.0, precision="double"), ensemble)
    other = run_heating(HeatingConfig(L=8, omega=3.0, t_max=30.0, precision="double",
                                      num_global=ng), ensemble)
    assert np.allclose(base.energy, other.energy, atol=1e-12)


def test_manifest_contents(ensemble):
    s = run_heating(HeatingConfig(L=4, omega=4.0, t_max=2.0), ensemble)
    m = s.manifest
    assert m["ensemble"]["sha256"] == ensemble.digest()
    assert m["heating"]["L"] == 4 and m["precision"] == "single"
    assert m["wall_time_s"] >= 0


def test_stop_ratio_ends_early(ensemble):
    cfg = HeatingConfig(L=8, omega=2.0, t_max=500.0, stop_ratio=math.exp(-2))
    s = run_heating(cfg, ensemble)
    assert s.records[-1].t < 500
    assert s.energy[-1] / s.energy[0] <= math.exp(-2)
    extract_rate(s)


def test_norm_drift_aborts(ensemble, monkeypatch):
    monkeypatch.setattr(experiments, "norm", lambda psi: 1.5)
    with pytest.raises(NormDriftError) as exc:
        run_heating(HeatingConfig(L=4, omega=4.0, t_max=5.0), ensemble)
    assert exc.value.series.manifest["aborted_at_period"] == 0


def _synthetic(gamma, omega=4.0, t_max=None):
    T = 2 * math.pi / omega
    t_max = t_max if t_max is not None else 6 / gamma
    t = np.array(record_schedule(T, t_max)) * T
    return t, -3.0 * np.exp(-gamma * t)


@pytest.mark.parametrize("gamma", [0.01, 0.05, 0.2])
def test_rate_of_pure_exponential(gamma):
    assert extract_rate(_synthetic(gamma)) == pytest.approx(gamma, rel=0.01)


@settings(max_examples=50)
@given(gamma=st.floats(1e-3, 0.5), scale=st.floats(-100, 100).filter(lambda s: abs(s) > 1e-3))
def test_rate_invariant_under_rescaling(gamma, scale):
    t, e = _synthetic(gamma)
    assert extract_rate((t, scale * e)) == pytest.approx(extract_rate((t, e)), rel=1e-12)


def test_rate_accepts_series():
    t, e = _synthetic(0.02)
    series = ObservableSeries([Record(i, ti, ei, 0.0, 1.0, 0) for i, (ti, ei) in enumerate(zip(t, e))])
    assert extract_rate(series) == extract_rate((t, e))


def test_not_thermalized():
    t = np.linspace(0, 100, 101)
    with pytest.raises(NotThermalizedError):
        extract_rate((t, 1 - 0.5 * t / 100))


def test_recrossing_warns():
    t = np.arange(8.0)
    e = np.array([1.0, 0.5, 0.3, 0.4, 0.2, 0.1, 0.05, 0.01])
    with pytest.warns(NonMonotoneCrossingWarning):
        times = threshold_times(t, e)
    # first crossing of exp(-1) is between t=1 and t=2, in log t
    frac = (math.exp(-1) - 0.5) / (0.3 - 0.5)
    assert times[0] == pytest.approx(math.exp(frac * math.log(2)))


def test_first_interval_is_linear_in_t():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    e = np.array([1.0, 0.1, 0.05, 0.01])
    t1, t2 = threshold_times(t, e)
    assert t1 == pytest.approx((1 - math.exp(-1)) / 0.9)
    assert t2 == pytest.approx((1 - math.exp(-2)) / 0.9)


def test_fit_exact_line():
    omegas = np.arange(3.0, 8.5, 0.5)
    f = fit_rates([(w, math.exp(-2 * w + 5)) for w in omegas])
    assert f.a == pytest.approx(-2, abs=1e-12) and f.b == pytest.approx(5, abs=1e-11)
    assert f.r_squared == pytest.approx(1.0, abs=1e-12)
    assert f.stderr_a <= 1e-12


def test_fit_exclusion_semantics():
    pts = [(1.0, math.exp(-1)), (2.0, 10.0), (3.0, math.exp(-3)), (4.0, math.exp(-4))]
    f = fit_rates(pts, exclude=[1])
    g = fit_rates([pts[0], pts[2], pts[3]])
    assert (f.a, f.b, f.rss) == (g.a, g.b, g.rss)
    assert f.excluded == (1,)


def test_fit_matches_scipy(rng):
    w = np.linspace(5, 8, 7)
    g = np.exp(-2.5 * w + 11 + 0.1 * rng.standard_normal(7))
    f = fit_rates(list(zip(w, g)))
    ref = stats.linregress(w, np.log(g))
    assert f.a == pytest.approx(ref.slope, rel=1e-12)
    assert f.b == pytest.approx(ref.intercept, rel=1e-12)
    assert f.stderr_a == pytest.approx(ref.stderr, rel=1e-10)
    assert f.stderr_b == pytest.approx(ref.intercept_stderr, rel=1e-10)
    assert f.r_squared == pytest.approx(ref.rvalue ** 2, rel=1e-12)


@pytest.mark.parametrize("pts", [[(1, 1.0), (2, 2.0)], [(1, 1.0), (2, 0.0), (3, 1.0)]])
def test_fit_rejects(pts):
    with pytest.raises(ValueError):
        fit_rates(pts)


def test_echo_zero_turnaround(ensemble):
    r = run_echo(HeatingConfig(L=8, omega=4.0, num_global=2), 0.0, ensemble)
    assert r.overlap_error == 0 and r.periods == 0


def test_echo_rejects_non_multiple(ensemble):
    with pytest.raises(ValueError):
        run_echo(HeatingConfig(L=6, omega=4.0), 1.0, ensemble)


def test_echo_double_precision(ensemble):
    cfg = HeatingConfig(L=10, omega=4.0, precision="double")
    r = run_echo(cfg, 100 * cfg.period, ensemble)
    assert r.overlap_error <= 1e-10
    assert r.energy_rel_error <= 1e-10


def test_echo_identity_circuit(monkeypatch):
    """A circuit whose gates are all identities returns psi0 exactly."""
    real_build = experiments.build_circuit

    def identity_circuit(ens, L, omega, fusion=2):
        c = real_build(ens, L, omega, fusion)
        c.gates = [GateBlock(g.targets, np.eye(4)) for g in c.gates]
        c.inverse_gates = [GateBlock(g.targets, np.eye(4)) for g in reversed(c.gates)]
        return c

    monkeypatch.setattr(experiments, "build_circuit", identity_circuit)
    ens = build_ensemble(3, 7)
    for n in (1, 5, 17):
        cfg = HeatingConfig(L=8, omega=4.0, num_global=2)
        assert run_echo(cfg, n * cfg.period, ens).overlap_error == 0


def test_echo_single_precision_grows_with_time(ensemble):
    cfg = HeatingConfig(L=8, omega=6.0)
    errs = [run_echo(cfg, n * cfg.period, ensemble).overlap_error for n in (1, 10, 100)]
    assert errs[0] < 1e-6
    assert stats.spearmanr([1, 10, 100], errs).statistic > 0


def test_benchmark_contract():
    res = benchmark_period(8, num_global=1, repetitions=10)
    assert res.repetitions == 10
    assert res.min_s <= res.mean_s <= res.max_s
    assert res.mean_s == pytest.approx(res.total_s / 10)
    assert res.reference_cost == 8 * 256
    with pytest.raises(ValueError):
        benchmark_period(8, repetitions=9)


def test_rate_matches_double_rerun(ensemble):
    single = run_heating(HeatingConfig(L=10, omega=2.0, t_max=200.0), ensemble)
    double = run_heating(HeatingConfig(L=10, omega=2.0, t_max=200.0, precision="double"), ensemble)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonMonotoneCrossingWarning)
        assert extract_rate(single) == pytest.approx(extract_rate(double), rel=0.05)


def test_heating_to_infinite_temperature_small(ensemble):
    from floqsim.model import infinite_temperature_sigma
    s = run_heating(HeatingConfig(L=10, omega=2.0, t_max=1000.0), ensemble)
    ref = infinite_temperature_sigma(build_circuit(ensemble, 10, 2.0))
    assert abs(s.energy[-1]) <= 0.05 * abs(s.energy[0])
    assert s.sigma[-1] == pytest.approx(ref, rel=0.10)
