"""Command-line entry point: ``molnonmarkov <verb> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import __version__
from .config import ConfigError, build_config, config_echo, load_raw, set_field
from .grid import vibrational_eigenstates
from .oracles import ORACLE_PRESETS, oracle_check
from .report import (
    INTERVAL_COLUMNS,
    emit_outputs,
    interval_report,
    intervals_csv_text,
    read_trajectory_csv,
)
from .runner import run_scenario
from .units import UnitError, convert_units, to_atomic

log = logging.getLogger("molnonmarkov")


def _value(text: str):
    """Command-line value parsed as YAML, so 1e-3, "6.6 cm-1" and [1, 2] all work."""
    value = yaml.safe_load(text)
    if isinstance(value, str):
        try:
            return float(value)  # YAML 1.1 reads 1e-3 as text
        except ValueError:
            pass
    return value


def _load(path, overrides=()):
    raw = load_raw(path)
    for dotted, value in overrides:
        raw = set_field(raw, dotted, value)
    base = Path(path).parent if Path(path).exists() else Path(".")
    return raw, build_config(raw, base)


def _parse_set(items):
    out = []
    for item in items or ():
        if "=" not in item:
            raise SystemExit(f"--set expects path=value, got {item!r}")
        key, value = item.split("=", 1)
        out.append((key.strip(), _value(value)))
    return out


def _time_unit(config):
    name = config.units.get("time_name", "au")
    return float(config.units.get("time_au", 1.0)), name


def _run_one(path, overrides, out_dir, plot_data, render):
    _, config = _load(path, overrides)
    traj, manifest = run_scenario(config, config_echo=config_echo(config))
    bounds = list(config.report_intervals)
    report = interval_report(traj, bounds) if len(bounds) >= 2 else None
    emit_outputs(traj, report, out_dir, manifest, plot_data=plot_data, render=render,
                 time_unit=_time_unit(config))
    return config, report, manifest


def _print_report(report, scale=1.0, unit="au"):
    print(f"{'t1':>10} {'t2':>10} {'F':>14} {'mean n':>8} {'Bloch ratio':>13} {'gap':>10}  [{unit}]")
    for r in report:
        print(f"{r.t1 / scale:10.4g} {r.t2 / scale:10.4g} {r.F:14.6g} {r.mean_n_index:8.3f} "
              f"{r.bloch_ratio:13.5g} {r.guard_gap / scale:10.4g}")


def cmd_run(args) -> int:
    out = Path(args.out or f"runs/{Path(args.config).stem}")
    config, report, manifest = _run_one(args.config, _parse_set(args.set), out,
                                        args.plot_data, args.render)
    print(f"{config.name}: {manifest.n_samples} samples, {manifest.n_invalid} guard-invalid, "
          f"{manifest.wall_seconds:.1f} s -> {out}")
    if report is not None:
        _print_report(report, *_time_unit(config))
    return 0


def _slug(value) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", str(value)).strip("_")


def cmd_sweep(args) -> int:
    if "=" not in args.vary:
        raise SystemExit("--vary expects path=a,b,c")
    field, values = args.vary.split("=", 1)
    values = [_value(v) for v in values.split(",") if v.strip()]
    base = _parse_set(args.set)
    root = Path(args.out or f"runs/{Path(args.config).stem}-sweep")
    jobs = []
    for i, value in enumerate(values):
        jobs.append((args.config, base + [(field, value)], root / f"{i:02d}_{_slug(value)}",
                     args.plot_data, args.render))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]
    # ordered merge: rows follow the --vary order regardless of completion order
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep_intervals.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((field, "directory") + INTERVAL_COLUMNS)
        for value, job, (config, report, _) in zip(values, jobs, results):
            if report is None:
                continue
            for line in intervals_csv_text(report).splitlines()[1:]:
                w.writerow([value, job[2].name] + line.split(","))
    for value, (config, report, manifest) in zip(values, results):
        print(f"{field} = {value}: {manifest.n_samples} samples")
        if report is not None:
            _print_report(report, *_time_unit(config))
    return 0


def cmd_eigen(args) -> int:
    _, config = _load(args.config, _parse_set(args.set))
    for label, curve in (("g", config.V_g), ("e", config.V_e)):
        if args.channel not in (label, "both"):
            continue
        pairs = vibrational_eigenstates(curve, config.grid, config.mass, args.count)
        print(f"# channel {label}: index, energy [hartree], energy [cm-1]")
        for i, (energy, _) in enumerate(pairs):
            print(f"{label} {i:4d} {energy: .15e} {convert_units(energy, 'hartree', 'cm-1'): .6f}")
    return 0


def cmd_oracle(args) -> int:
    result = oracle_check(args.name)
    for line in result.lines():
        print(line)
    print("PASS" if result.passed else "FAIL")
    return 0 if result.passed else 1


def _unit_scale(unit: str) -> float:
    try:
        return float(unit)
    except ValueError:
        return float(to_atomic(1.0, unit))


def cmd_report(args) -> int:
    traj = read_trajectory_csv(args.trajectory)
    scale = _unit_scale(args.unit)
    bounds = [float(x) * scale for x in args.intervals.split(",")]
    report = interval_report(traj, bounds)
    _print_report(report, scale, args.unit)
    if args.out:
        Path(args.out).write_text(intervals_csv_text(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    p = argparse.ArgumentParser(
        prog="molnonmarkov",
        description="Propagate laser-coupled two-channel wave packets and report decoherence "
                    "rates and non-Markovianity.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    def scenario(sp):
        sp.add_argument("config", help="scenario file (YAML) or preset name")
        sp.add_argument("--set", action="append", metavar="PATH=VALUE",
                        help="override a config field, e.g. integrator.t_final='100 tu'")

    r = sub.add_parser("run", help="propagate one scenario and write its outputs")
    scenario(r)
    r.add_argument("--out", help="output directory (default runs/<config stem>)")
    r.add_argument("--plot-data", action="store_true", help="write two-column panel series")
    r.add_argument("--render", action="store_true", help="render panel SVGs (needs matplotlib)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario for several values of one field")
    scenario(s)
    s.add_argument("--vary", required=True, metavar="PATH=A,B,C")
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--plot-data", action="store_true")
    s.add_argument("--render", action="store_true")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eigen", help="vibrational levels of both potentials")
    scenario(e)
    e.add_argument("--count", type=int, default=10)
    e.add_argument("--channel", choices=("g", "e", "both"), default="both")
    e.set_defaults(func=cmd_eigen)

    o = sub.add_parser("oracle-check", help="compare a closed-form scenario with its solution")
    o.add_argument("name", choices=sorted(set(ORACLE_PRESETS) | set(ORACLE_PRESETS.values())))
    o.set_defaults(func=cmd_oracle)

    rep = sub.add_parser("report", help="interval summary of an existing trajectory.csv")
    rep.add_argument("trajectory")
    rep.add_argument("--intervals", required=True, metavar="T1,T2,...")
    rep.add_argument("--unit", default="au",
                     help="unit of the boundaries: a time unit name or atomic units per unit")
    rep.add_argument("--out", help="also write the report as CSV")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (UnitError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
