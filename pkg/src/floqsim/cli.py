"""Command-line front end: ``floqsim {heat,echo,bench,fit}``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure (norm
blow-up, series that never thermalize), 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .experiments import (NormDriftError, NotThermalizedError, benchmark_period,
                          precision_fidelity_error, run_echo, run_heating, _periods_for)
from .io import (ConfigError, emit_series, fit_command, omega_grid, parse_config, run_stem,
                 write_record)
from .model import build_ensemble

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3
# direct single-vs-double comparison is only run where a second state is cheap
DIRECT_COMPARE_MAX_L = 12

log = logging.getLogger("floqsim")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override its values")
    p.add_argument("--L", type=int, help="number of qubits (even)")
    p.add_argument("--Ng", type=int, help="number of global qubits; 2**Ng shard workers")
    p.add_argument("--seed", type=int, help="ensemble seed")
    p.add_argument("--precision", choices=("single", "double"))
    p.add_argument("--fusion", type=int, help="gate-fusion window in qubits (2 = off)")
    p.add_argument("--max-bonds", dest="max_bonds", type=int, help="bonds sampled for the ensemble")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--force", action="store_true", help="overwrite existing result files")


def _omega(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--omega", type=float, nargs="+", help="drive frequencies")
    g.add_argument("--omega-range", dest="omega_range", type=float, nargs=3,
                   metavar=("START", "STOP", "STEP"), help="inclusive frequency grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floqsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    heat = sub.add_parser("heat", help="heating runs: E(t), sigma_E(t) per frequency")
    _common(heat)
    _omega(heat)
    heat.add_argument("--t-max", dest="t_max", type=float)
    heat.add_argument("--t-dense", dest="t_dense", type=float, help="record every period up to this time")
    heat.add_argument("--stride", type=int, help="record every stride-th period after t_dense")

    echo = sub.add_parser("echo", help="forward/backward echo overlap error")
    _common(echo)
    _omega(echo)
    echo.add_argument("--t-f", dest="t_f", type=float, help="turnaround time (multiple of T)")

    bench = sub.add_parser("bench", help="wall time per Floquet period")
    _common(bench)
    bench.add_argument("--repetitions", type=int)

    fit = sub.add_parser("fit", help="extract rates from heat CSVs and fit ln Gamma = a omega + b")
    fit.add_argument("inputs", nargs="+", help="heat CSV files")
    fit.add_argument("--exclude", type=int, nargs="*",
                     help="indices (after sorting by omega) left out of the fit")
    fit.add_argument("--output-dir", dest="output_dir")
    fit.add_argument("--force", action="store_true")
    fit.add_argument("--config", help="flat JSON config file")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "force", "verbose", "omega_range"}
    out = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if getattr(args, "omega_range", None):
        out["omega"] = omega_grid(*args.omega_range)
    return out


def _heat(cfg, force: bool) -> int:
    out = Path(cfg.output_dir)
    stems = [run_stem(cfg, w) for w in cfg.omega]
    if not force:
        for stem in stems:
            if (out / f"{stem}.csv").exists():
                raise FileExistsError(f"{out / stem}.csv exists; pass --force to overwrite")
    ensemble = build_ensemble(cfg.seed, max(cfg.max_bonds, cfg.L - 1))
    status = EXIT_OK
    for hc, stem in zip(cfg.heating_configs(), stems):
        try:
            series = run_heating(hc, ensemble)
        except NormDriftError as exc:
            log.error("omega=%g: %s; writing the records up to the abort", hc.omega, exc)
            series, status = exc.series, EXIT_RUNTIME
        csv_path, _ = emit_series(series, out, stem, cfg.for_omega(hc.omega), force)
        last = series.records[-1]
        print(f"omega={hc.omega:g} records={len(series)} E(0)={series.records[0].energy:.6f} "
              f"E(t={last.t:.4g})={last.energy:.6f} -> {csv_path}")
    return status


def _echo(cfg, force: bool) -> int:
    ensemble = build_ensemble(cfg.seed, max(cfg.max_bonds, cfg.L - 1))
    for hc in cfg.heating_configs():
        report = run_echo(hc, cfg.t_f, ensemble)
        record = {"report": asdict(report), "config": cfg.for_omega(hc.omega).to_dict(),
                  "ensemble": ensemble.manifest()}
        if cfg.L <= DIRECT_COMPARE_MAX_L:
            n = _periods_for(cfg.t_f, hc.period)
            record["direct_fidelity_error_2tf"] = precision_fidelity_error(hc, 2 * n, ensemble)
        path = Path(cfg.output_dir) / (f"echo_L{cfg.L}_Ng{cfg.Ng}_w{hc.omega:g}_tf{cfg.t_f:g}"
                                       f"_s{cfg.seed}_{cfg.precision}.json")
        write_record(record, path, force)
        print(f"omega={hc.omega:g} t_f={cfg.t_f:g} overlap_error={report.overlap_error:.3e} "
              f"dE/E={report.energy_rel_error:.3e} -> {path}")
    return EXIT_OK


def _bench(cfg, force: bool) -> int:
    res = benchmark_period(cfg.L, cfg.Ng, cfg.fusion, cfg.repetitions, cfg.precision, cfg.seed)
    path = Path(cfg.output_dir) / f"bench_L{cfg.L}_Ng{cfg.Ng}_q{cfg.fusion}_{cfg.precision}.json"
    write_record({"result": asdict(res), "config": cfg.to_dict()}, path, force)
    print(f"L={res.L} mean={res.mean_s:.6g}s min={res.min_s:.6g}s max={res.max_s:.6g}s -> {path}")
    return EXIT_OK


def _fit(cfg, force: bool) -> int:
    outcome = fit_command(cfg.inputs, cfg.exclude, cfg.output_dir, force)
    for path, reason in outcome.failures:
        print(f"FAILED {path}: {reason}", file=sys.stderr)
    if outcome.fit is None:
        print(f"no fit: {outcome.error}", file=sys.stderr)
        return EXIT_RUNTIME
    f = outcome.fit
    print(f"a={f.a:.6g} (+/- {f.stderr_a:.2g})  b={f.b:.6g} (+/- {f.stderr_b:.2g})  "
          f"R^2={f.r_squared:.4f}  points={len(f.points) - len(f.excluded)}")
    return EXIT_OK if outcome.ok else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, _overrides(args), args.command)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    handler = {"heat": _heat, "echo": _echo, "bench": _bench, "fit": _fit}[cfg.command]
    try:
        return handler(cfg, args.force)
    except (NormDriftError, NotThermalizedError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
