import json
import math
import subprocess
import sys

import numpy as np
import pytest

from floqsim.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_RUNTIME, main
from floqsim.experiments import ObservableSeries, Record, record_schedule
from floqsim.io import (ConfigError, RunConfig, emit_series, fit_command, omega_grid, parse_config,
                        read_series, series_to_csv)


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_defaults_from_empty_file(tmp_path):
    empty = tmp_path / "c.json"
    empty.write_text("")
    cfg = parse_config(empty, {"L": 10, "omega": [4]}, "heat")
    assert cfg == RunConfig(command="heat", L=10, omega=(4.0,))
    assert (cfg.Ng, cfg.seed, cfg.precision, cfg.fusion, cfg.stride, cfg.t_dense) == (0, 0, "single", 2, 10, 100.0)
    assert cfg.workers == 1


def test_ng_error_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config(None, {"L": 4, "Ng": 5, "omega": [4]}, "heat")
    assert exc.value.field == "Ng" and "Ng" in str(exc.value)


@pytest.mark.parametrize("bad,field", [({"L": 5}, "L"), ({"precision": "half"}, "precision"),
                                       ({"fusion": 20}, "fusion"), ({"omega": [-1]}, "omega"),
                                       ({"seed": -1}, "seed"), ({"stride": 0}, "stride")])
def test_validation_fields(bad, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(None, {"L": 6, "omega": [4]} | bad, "heat")
    assert exc.value.field == field


def test_unknown_and_nested_keys(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(write_json(tmp_path / "a.json", {"L": 4, "bogus": 1}), None, "heat")
    with pytest.raises(ConfigError, match="nested"):
        parse_config(write_json(tmp_path / "b.json", {"L": {"y": 1}}), None, "heat")


def test_flags_override_file(tmp_path):
    path = write_json(tmp_path / "c.json", {"L": 8, "omega": [3, 4], "seed": 7})
    cfg = parse_config(path, {"L": 10}, "heat")
    assert cfg.L == 10 and cfg.omega == (3.0, 4.0) and cfg.seed == 7


def test_omega_grid_sweep():
    grid = omega_grid(5, 8, 0.5)
    assert grid == (5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0)
    cfg = parse_config(None, {"L": 10, "omega": grid}, "heat")
    assert len(cfg.heating_configs()) == 7


def test_manifest_roundtrip(tmp_path):
    cfg = parse_config(None, {"L": 6, "omega": [4.5], "Ng": 2, "t_max": 3.0, "seed": 11}, "heat")
    series = ObservableSeries([Record(0, 0.0, -1.0, 0.5, 1.0, 0)], {"precision": "single"})
    _, man = emit_series(series, tmp_path, "run", cfg)
    echoed = json.loads(man.read_text())["config"]
    assert parse_config(write_json(tmp_path / "echo.json", echoed)) == cfg


def test_csv_layout(tmp_path):
    recs = [Record(i, i * 0.5, -1.0 / (i + 1), 0.1 * i, 1.0, 3 * i) for i in range(3)]
    csv_path, _ = emit_series(ObservableSeries(recs), tmp_path, "s")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "n,t,E,sigma_E,norm,gates"
    assert len(lines) == 4
    back = read_series(csv_path)
    assert back.records == recs


def test_emit_refuses_overwrite(tmp_path):
    s = ObservableSeries([Record(0, 0.0, -1.0, 0.5, 1.0, 0)])
    emit_series(s, tmp_path, "s")
    with pytest.raises(FileExistsError):
        emit_series(s, tmp_path, "s")
    emit_series(s, tmp_path, "s", force=True)
    assert not list(tmp_path.glob(".*.tmp"))


def _synthetic_csv(directory, omega, gamma, t_max=None):
    T = 2 * math.pi / omega
    t_max = t_max if t_max is not None else 6 / gamma
    ns = record_schedule(T, t_max)
    recs = [Record(n, n * T, -2.0 * math.exp(-gamma * n * T), 1.0, 1.0, 0) for n in ns]
    cfg = RunConfig(command="heat", L=4, omega=(omega,))
    path, _ = emit_series(ObservableSeries(recs), directory, f"w{omega:g}", cfg)
    return path


def test_fit_command_exact(tmp_path):
    omegas = [4.0, 4.5, 5.0, 5.5, 6.0]
    paths = []
    for w in omegas:
        gamma = math.exp(-2 * w + 5)
        T = 2 * math.pi / w
        # sample exactly at the crossing times so interpolation is exact
        t = np.array([0.0, T, 1 / gamma, 2 / gamma, 3 / gamma])
        recs = [Record(i, ti, -math.exp(-gamma * ti), 1.0, 1.0, 0) for i, ti in enumerate(t)]
        p, _ = emit_series(ObservableSeries(recs), tmp_path,
                           f"w{w:g}", RunConfig(command="heat", L=4, omega=(w,)))
        paths.append(p)
    out = fit_command(paths, output_dir=tmp_path / "fit")
    assert out.ok
    assert out.fit.a == pytest.approx(-2, abs=1e-10)
    assert out.fit.b == pytest.approx(5, abs=1e-9)
    summary = json.loads((tmp_path / "fit" / "fit.json").read_text())
    assert summary["stderr_kind"] == "OLS"
    table = (tmp_path / "fit" / "rates.dat").read_text().splitlines()
    assert table[0].startswith("#") and len(table) == 6


def test_fit_cli_one_unthermalized(tmp_path, capsys):
    paths = [_synthetic_csv(tmp_path, w, math.exp(-2 * w + 5)) for w in (3.0, 3.5, 4.0, 4.5)]
    paths.append(_synthetic_csv(tmp_path, 5.0, math.exp(-5), t_max=0.2 / math.exp(-5)))
    code = main(["fit", *map(str, paths), "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_RUNTIME
    summary = json.loads((tmp_path / "out" / "fit.json").read_text())
    assert len(summary["points"]) == 4
    assert "FAILED" in capsys.readouterr().err


def test_fit_cli_exclude(tmp_path):
    paths = [_synthetic_csv(tmp_path, w, math.exp(-2 * w + 5)) for w in (3.0, 3.5, 4.0, 4.5, 5.0)]
    assert main(["fit", *map(str, paths), "--exclude", "0", "1",
                 "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "fit.json").read_text())["excluded"] == [0, 1]


def test_heat_cli_bytes_identical(tmp_path):
    args = ["heat", "--L", "6", "--Ng", "1", "--omega", "3", "4", "--t-max", "20", "--t-dense", "10"]
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--output-dir", str(tmp_path / "b")]) == EXIT_OK
    for name in ("heat_L6_Ng1_w3_s0_single.csv", "heat_L6_Ng1_w4_s0_single.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == EXIT_IO
    assert main(args + ["--output-dir", str(tmp_path / "a"), "--force"]) == EXIT_OK


def test_heat_cli_omega_range(tmp_path):
    assert main(["heat", "--L", "4", "--omega-range", "5", "6", "0.5", "--t-max", "2",
                 "--output-dir", str(tmp_path)]) == EXIT_OK
    assert len(list(tmp_path.glob("*.csv"))) == 3


def test_cli_config_errors(tmp_path, capsys):
    assert main(["heat", "--L", "4", "--Ng", "5", "--omega", "4"]) == EXIT_CONFIG
    assert "Ng" in capsys.readouterr().err
    assert main(["heat", "--config", str(tmp_path / "missing.json"), "--omega", "4"]) == EXIT_IO
    assert main(["echo", "--L", "4", "--omega", "4", "--t-f", "1.0",
                 "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_echo_and_bench_cli(tmp_path):
    assert main(["echo", "--L", "6", "--omega", str(2 * math.pi), "--t-f", "3",
                 "--output-dir", str(tmp_path)]) == EXIT_OK
    (rec,) = tmp_path.glob("echo_*.json")
    data = json.loads(rec.read_text())
    assert data["report"]["periods"] == 3 and "direct_fidelity_error_2tf" in data
    assert main(["bench", "--L", "6", "--repetitions", "10", "--output-dir", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "bench_L6_Ng0_q2_single.json").read_text())["result"]["repetitions"] == 10


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "floqsim", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "heat" in out.stdout


def test_csv_float_roundtrip_exact():
    r = Record(1, 0.1 + 0.2, -1 / 3, math.pi, 1 - 1e-9, 5)
    text = series_to_csv(ObservableSeries([r])).decode().splitlines()[1]
    assert [float(x) for x in text.split(",")[1:5]] == [r.t, r.energy, r.sigma, r.norm]
