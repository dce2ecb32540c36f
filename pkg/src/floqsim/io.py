"""Run configuration and result files.

Config files are flat JSON objects (no nested values). Each heating run is
written as ``<stem>.csv`` (columns n, t, E, sigma_E, norm, gates) next to
``<stem>.manifest.json`` holding the config echo, ensemble hash, precision,
wall time and software version.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .experiments import (HeatingConfig, NotThermalizedError, ObservableSeries, Record,
                          extract_rate, fit_rates)
from .fusion import MAX_WINDOW, MIN_WINDOW

COMMANDS = ("heat", "echo", "bench", "fit")
CSV_COLUMNS = ("n", "t", "E", "sigma_E", "norm", "gates")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    L: Optional[int] = None
    Ng: int = 0
    seed: int = 0
    omega: tuple = ()
    t_max: float = 0.0
    t_dense: float = 100.0
    stride: int = 10
    precision: str = "single"
    fusion: int = 2
    output_dir: str = "results"
    max_bonds: int = 39
    t_f: Optional[float] = None
    repetitions: int = 100
    inputs: tuple = ()
    exclude: tuple = ()

    @property
    def workers(self) -> int:
        return 1 << self.Ng

    def heating_configs(self) -> list:
        """One HeatingConfig per requested frequency, in the given order."""
        return [HeatingConfig(L=self.L, omega=w, seed=self.seed, num_global=self.Ng,
                              t_max=self.t_max, t_dense=self.t_dense, stride=self.stride,
                              precision=self.precision, fusion=self.fusion,
                              max_bonds=max(self.max_bonds, self.L - 1))
                for w in self.omega]

    def for_omega(self, omega: float) -> "RunConfig":
        return replace(self, omega=(float(omega),))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("omega", "inputs", "exclude"):
            d[k] = list(d[k])
        return d


_FIELDS = {f.name for f in fields(RunConfig)}
_LIST_FIELDS = {"omega", "inputs", "exclude"}


def omega_grid(start: float, stop: float, step: float) -> tuple:
    """Inclusive, evenly spaced grid, e.g. (5, 8, 0.5) -> 5, 5.5, ..., 8."""
    if step <= 0:
        raise ConfigError("omega", f"grid step must be positive, got {step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(start + i * step) for i in range(max(count, 0)))


def _coerce(values: dict) -> dict:
    out = {}
    for key, val in values.items():
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        if isinstance(val, dict):
            raise ConfigError(key, "nested values are not allowed")
        try:
            if key in _LIST_FIELDS:
                seq = val if isinstance(val, (list, tuple)) else [val]
                conv = {"omega": float, "inputs": str, "exclude": int}[key]
                out[key] = tuple(conv(v) for v in seq)
            elif key in ("L", "Ng", "seed", "stride", "fusion", "max_bonds", "repetitions"):
                if isinstance(val, float) and not val.is_integer():
                    raise ValueError(f"expected an integer, got {val}")
                out[key] = None if val is None else int(val)
            elif key in ("t_max", "t_dense", "t_f"):
                out[key] = None if val is None else float(val)
            else:
                out[key] = str(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None
    return out


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}, got {cfg.command!r}")
    if cfg.precision not in ("single", "double"):
        raise ConfigError("precision", f"must be 'single' or 'double', got {cfg.precision!r}")
    if cfg.Ng < 0:
        raise ConfigError("Ng", f"must be >= 0, got {cfg.Ng}")
    if not MIN_WINDOW <= cfg.fusion <= MAX_WINDOW:
        raise ConfigError("fusion", f"must be in [{MIN_WINDOW}, {MAX_WINDOW}], got {cfg.fusion}")
    if cfg.stride < 1:
        raise ConfigError("stride", f"must be >= 1, got {cfg.stride}")
    if cfg.t_max < 0:
        raise ConfigError("t_max", f"must be >= 0, got {cfg.t_max}")
    if cfg.t_dense < 0:
        raise ConfigError("t_dense", f"must be >= 0, got {cfg.t_dense}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {cfg.seed}")
    if cfg.command == "fit":
        if not cfg.inputs:
            raise ConfigError("inputs", "fit needs at least one CSV file")
        return cfg
    if cfg.L is None:
        raise ConfigError("L", "is required")
    if cfg.L < 2 or cfg.L % 2:
        raise ConfigError("L", f"must be an even integer >= 2, got {cfg.L}")
    if cfg.Ng > cfg.L:
        raise ConfigError("Ng", f"must not exceed L={cfg.L}, got {cfg.Ng}")
    if cfg.command in ("heat", "echo"):
        if not cfg.omega:
            raise ConfigError("omega", "at least one frequency is required")
        if any(not w > 0 for w in cfg.omega):
            raise ConfigError("omega", f"frequencies must be positive, got {cfg.omega}")
    if cfg.command == "echo" and cfg.t_f is None:
        raise ConfigError("t_f", "echo needs a turnaround time")
    if cfg.command == "bench" and cfg.repetitions < 10:
        raise ConfigError("repetitions", f"must be >= 10, got {cfg.repetitions}")
    return cfg


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc.strerror}") from exc
    text = text.strip()
    if not text:
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("file", f"{path} is not valid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError("file", f"{path} must hold a flat JSON object")
    return data


def parse_config(path=None, overrides: Optional[dict] = None, command: Optional[str] = None) -> RunConfig:
    """Merge file values and overrides (overrides win), apply defaults, validate."""
    values = {}
    if path is not None:
        values.update(_coerce(read_config_file(path)))
    values.update(_coerce({k: v for k, v in (overrides or {}).items() if v is not None}))
    if command is not None:
        values["command"] = command
    if "command" not in values:
        raise ConfigError("command", "is required")
    return validate(RunConfig(**values))


def _atomic_write(path: Path, data: bytes, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def series_to_csv(series: ObservableSeries) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in series.records:
        w.writerow([r.n, repr(float(r.t)), repr(float(r.energy)), repr(float(r.sigma)),
                    repr(float(r.norm)), r.gates])
    return buf.getvalue().encode()


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def run_stem(cfg: RunConfig, omega: float) -> str:
    return f"heat_L{cfg.L}_Ng{cfg.Ng}_w{omega:g}_s{cfg.seed}_{cfg.precision}"


def emit_series(series: ObservableSeries, directory, stem: str, config: Optional[RunConfig] = None,
                force: bool = False) -> tuple:
    """Write ``<stem>.csv`` and ``<stem>.manifest.json`` atomically."""
    directory = Path(directory)
    csv_path = directory / f"{stem}.csv"
    man_path = directory / f"{stem}.manifest.json"
    manifest = dict(series.manifest)
    manifest.setdefault("software_version", __version__)
    manifest["records"] = len(series.records)
    if config is not None:
        manifest["config"] = config.to_dict()
    _atomic_write(csv_path, series_to_csv(series), force)
    _atomic_write(man_path, _dump_json(manifest), force)
    return csv_path, man_path


def write_record(obj: dict, path, force: bool = False) -> Path:
    path = Path(path)
    _atomic_write(path, _dump_json(obj), force)
    return path


def read_series(csv_path) -> ObservableSeries:
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{csv_path}: expected header {','.join(CSV_COLUMNS)}")
    records = [Record(int(n), float(t), float(e), float(s), float(nr), int(g))
               for n, t, e, s, nr, g in rows[1:]]
    man_path = csv_path.with_name(csv_path.name[:-len(".csv")] + ".manifest.json")
    manifest = json.loads(man_path.read_text()) if man_path.exists() else {}
    return ObservableSeries(records, manifest)


def series_omega(series: ObservableSeries) -> float:
    """Drive frequency from the manifest, else from t/n of the last record."""
    cfg = series.manifest.get("config") or {}
    if cfg.get("omega"):
        return float(cfg["omega"][0])
    heat = series.manifest.get("heating") or {}
    if "omega" in heat:
        return float(heat["omega"])
    last = [r for r in series.records if r.n > 0]
    if not last:
        raise ValueError("cannot infer omega from a series without evolved records")
    return 2 * np.pi * last[-1].n / last[-1].t


@dataclass
class FitOutcome:
    fit: Optional[object]
    rows: list
    failures: list
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.fit is not None and not self.failures


def fit_command(csv_files, exclude=(), output_dir=None, force: bool = False) -> FitOutcome:
    """Extract Gamma from each series and fit ln Gamma = a omega + b.

    Writes ``rates.dat`` (omega, Gamma, ln Gamma, status; whitespace
    separated, ``#`` header) and ``fit.json`` when ``output_dir`` is given.
    """
    rows, failures = [], []
    for path in csv_files:
        try:
            series = read_series(path)
            omega = series_omega(series)
        except (OSError, ValueError) as exc:
            failures.append((str(path), f"unreadable: {exc}"))
            continue
        try:
            rate = extract_rate(series)
            rows.append((omega, rate, "ok", str(path)))
        except NotThermalizedError as exc:
            failures.append((str(path), f"not thermalized: {exc}"))
            rows.append((omega, float("nan"), "not_thermalized", str(path)))
    rows.sort(key=lambda r: r[0])
    points = [(w, g) for w, g, status, _ in rows if status == "ok"]
    fit, error = None, None
    try:
        fit = fit_rates(points, exclude)
    except ValueError as exc:
        error = str(exc)
    outcome = FitOutcome(fit, rows, failures, error)
    if output_dir is not None:
        lines = ["# omega Gamma ln_Gamma status file"]
        for w, g, status, path in rows:
            lng = math.log(g) if g > 0 else float("nan")
            lines.append(f"{w!r} {g!r} {lng!r} {status} {path}")
        out = Path(output_dir)
        _atomic_write(out / "rates.dat", ("\n".join(lines) + "\n").encode(), force)
        summary = {"failures": [{"file": f, "reason": r} for f, r in failures], "error": error}
        if fit is not None:
            summary.update(a=fit.a, b=fit.b, stderr_a=fit.stderr_a, stderr_b=fit.stderr_b,
                           stderr_kind="OLS", rss=fit.rss, r_squared=fit.r_squared,
                           excluded=list(fit.excluded), points=[list(p) for p in fit.points])
        write_record(summary, out / "fit.json", force)
    return outcome
