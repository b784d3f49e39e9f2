"""Command-line entry point.

``tmpmbm run --config exp.cfg --out results/`` runs a Monte Carlo sweep and
writes four CSV files; ``tmpmbm validate`` runs the built-in oracle suites.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import re
import sys
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .filter import Thresholds
from .gospa import rms
from .oracles import SUITES, run_suites
from .sim import FILTERS, Cell, Experiment, ScenarioConfig, run_monte_carlo, scenario1, scenario2
from .sim import generate_ground_truth, generate_measurements, filter_config, write_measurements_csv
from .sim import _run_streams

RESULTS_HEADER = ["filter", "N_w", "p_full", "clutter_rate", "run", "window", "gospa_total",
                  "gospa_loc", "gospa_missed", "gospa_false", "n_local_hypo", "n_global_hypo"]
SUMMARY_HEADER = ["filter", "N_w", "p_full", "clutter_rate", "n_runs", "rms_gospa_total",
                  "rms_gospa_loc", "rms_gospa_missed", "rms_gospa_false"]
HYPOTHESES_HEADER = ["filter", "N_w", "p_full", "clutter_rate", "mean_local_hypo",
                     "mean_global_hypo", "max_local_hypo", "max_global_hypo"]
TIMING_HEADER = ["filter", "N_w", "p_full", "clutter_rate", "n_windows", "mean_step_ms",
                 "max_step_ms", "mean_run_s"]

_PRESETS = {"scenario1": scenario1, "scenario2": scenario2}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: Experiment
    window_lengths: tuple
    p_full: tuple
    clutter_rates: tuple

    def cells(self) -> list:
        out = []
        for n_w in self.window_lengths:
            for pf in self.p_full:
                for lam in self.clutter_rates:
                    out.append(Cell(n_w, pf, lam, len(out)))
        return out


def _fmt(x) -> str:
    """Full-precision decimal for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _line_of(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        head = re.match(r"\[([^\]]+)\]", stripped)
        if head:
            current = head.group(1).strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped, re.I):
            return no
    return None


def parse_config(text: str) -> ExperimentSpec:
    """Experiment from INI text; unknown or malformed entries raise ConfigError."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err).splitlines()[0], getattr(err, "lineno", None)) from None

    def convert(section, key, raw, kind):
        try:
            if kind is tuple:
                return tuple(float(v) for v in raw.split(","))
            if kind is bool:
                return cp.getboolean(section, key)
            return kind(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: cannot read {raw!r}",
                              _line_of(text, section, key)) from None

    known = {"scenario", "sweep", "filters", "run"}
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", _line_of_section(text, section))

    scn_sec = cp["scenario"] if cp.has_section("scenario") else {}
    preset = scn_sec.get("preset", "scenario1")
    if preset not in _PRESETS:
        raise ConfigError(f"[scenario] preset must be one of {sorted(_PRESETS)}",
                          _line_of(text, "scenario", "preset"))
    scn = _PRESETS[preset]()
    scn_kinds = {f.name: f.type for f in fields(ScenarioConfig)}
    overrides = {}
    for key, raw in scn_sec.items():
        if key == "preset":
            continue
        if key not in scn_kinds:
            raise ConfigError(f"[scenario] unknown key {key!r}", _line_of(text, "scenario", key))
        default = getattr(scn, key)
        if key == "area":
            vals = convert("scenario", key, raw, tuple)
            if len(vals) != 4:
                raise ConfigError("[scenario] area needs x_min, x_max, y_min, y_max",
                                  _line_of(text, "scenario", key))
            overrides[key] = (vals[:2], vals[2:])
        elif key == "fixture":
            overrides[key] = None if raw.strip().lower() in ("", "none") else raw.strip()
        elif key == "name":
            overrides[key] = raw.strip()
        elif isinstance(default, tuple) or key == "prior_std":
            overrides[key] = convert("scenario", key, raw, tuple)
        elif isinstance(default, int) and not isinstance(default, bool):
            overrides[key] = convert("scenario", key, raw, int)
        else:
            overrides[key] = convert("scenario", key, raw, float)
    try:
        scn = replace(scn, **overrides)
    except ValueError as err:
        raise ConfigError(f"[scenario] {err}") from None

    sweep = cp["sweep"] if cp.has_section("sweep") else {}
    lists = {}
    for key, default in (("window_lengths", (2, 5, 7, 10)), ("p_full", (0.7, 0.9)),
                         ("clutter_rates", (0.1, 1.0, 10.0))):
        if key in sweep:
            vals = convert("sweep", key, sweep[key], tuple)
            if not vals:
                raise ConfigError(f"[sweep] {key} must not be empty", _line_of(text, "sweep", key))
            lists[key] = vals
        else:
            lists[key] = default
    for key in sweep:
        if key not in lists:
            raise ConfigError(f"[sweep] unknown key {key!r}", _line_of(text, "sweep", key))
    n_ws = tuple(int(v) for v in lists["window_lengths"])
    if any(v < 1 or v != w for v, w in zip(n_ws, lists["window_lengths"])):
        raise ConfigError("[sweep] window_lengths must be positive integers",
                          _line_of(text, "sweep", "window_lengths"))
    if any(not 0 <= v <= 1 for v in lists["p_full"]):
        raise ConfigError("[sweep] p_full values must lie in [0, 1]", _line_of(text, "sweep", "p_full"))

    flt = cp["filters"] if cp.has_section("filters") else {}
    names = tuple(v.strip() for v in flt.get("names", ",".join(FILTERS)).split(",") if v.strip())
    bad = [n for n in names if n not in FILTERS]
    if bad or not names:
        raise ConfigError(f"[filters] names must be a subset of {', '.join(FILTERS)}",
                          _line_of(text, "filters", "names"))
    th = {}
    th_kinds = {f.name: f.type for f in fields(Thresholds)}
    for key, raw in flt.items():
        if key == "names":
            continue
        if key not in th_kinds:
            raise ConfigError(f"[filters] unknown key {key!r}", _line_of(text, "filters", key))
        th[key] = convert("filters", key, raw, int if key == "n_h" else float)
    try:
        thresholds = Thresholds(**th)
    except ValueError as err:
        raise ConfigError(f"[filters] {err}") from None

    run = cp["run"] if cp.has_section("run") else {}
    for key in run:
        if key not in ("runs", "seed"):
            raise ConfigError(f"[run] unknown key {key!r}", _line_of(text, "run", key))
    n_runs = convert("run", "runs", run.get("runs", "100"), int)
    seed = convert("run", "seed", run.get("seed", "0"), int)
    if n_runs < 1:
        raise ConfigError("[run] runs must be at least 1", _line_of(text, "run", "runs"))
    exp = Experiment(scenario=scn, filters=names, n_runs=n_runs, seed=seed, thresholds=thresholds)
    return ExperimentSpec(exp, n_ws, tuple(lists["p_full"]), tuple(lists["clutter_rates"]))


def _line_of_section(text, section):
    for no, line in enumerate(text.splitlines(), 1):
        if line.strip().lower() == f"[{section}]".lower():
            return no
    return None


class _Writers:
    """The only place output files are written; every row is flushed at once."""

    def __init__(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        self._files, self._csv = {}, {}
        for name, header in (("results", RESULTS_HEADER), ("summary", SUMMARY_HEADER),
                             ("hypotheses", HYPOTHESES_HEADER), ("timing", TIMING_HEADER)):
            fh = open(os.path.join(out_dir, f"{name}.csv"), "w", newline="")
            self._files[name], self._csv[name] = fh, csv.writer(fh, lineterminator="\n")
            self._csv[name].writerow(header)

    def rows(self, name, rows):
        self._csv[name].writerows([[_fmt(v) for v in row] for row in rows])
        self._files[name].flush()

    def close(self):
        for fh in self._files.values():
            fh.close()


def write_cell(writers: _Writers, exp: Experiment, cell: Cell, records) -> None:
    key = [cell.n_w, float(cell.p_full), float(cell.clutter_rate)]
    writers.rows("results", [
        [r.filter, *key, r.run, r.window, r.gospa.total, r.gospa.localisation, r.gospa.missed,
         r.gospa.false_, r.n_local, r.n_global]
        for r in records
    ])
    summary, hyp, timing = [], [], []
    for name in exp.filters:
        rs = [r for r in records if r.filter == name]
        if not rs:
            continue
        g = rms([r.gospa for r in rs])
        summary.append([name, *key, exp.n_runs, g.total, g.localisation, g.missed, g.false_])
        loc = np.array([r.n_local for r in rs], dtype=float)
        glo = np.array([r.n_global for r in rs], dtype=float)
        hyp.append([name, *key, float(loc.mean()), float(glo.mean()), int(loc.max()), int(glo.max())])
        ms = np.array([r.step_ms for r in rs])
        timing.append([name, *key, len(rs), float(ms.mean()), float(ms.max()),
                       float(ms.sum()) / 1e3 / exp.n_runs])
    writers.rows("summary", summary)
    writers.rows("hypotheses", hyp)
    writers.rows("timing", timing)


def dump_measurements(spec: ExperimentSpec, out_dir: str) -> None:
    """Measurement sets of run 0 of every sweep cell, one CSV per cell."""
    exp = spec.experiment
    scn = exp.scenario
    os.makedirs(out_dir, exist_ok=True)
    for cell in spec.cells():
        truth_rng, meas_rng = _run_streams(exp.seed, cell, 0)
        truth = generate_ground_truth(scn, truth_rng)
        cfg = filter_config(scn, cell, "tm-pmbm", exp.thresholds)
        windows = scn.windows(cell.n_w)
        Z_sets = [generate_measurements(truth, w, cfg.meas, cfg.clutter, meas_rng) for w in windows]
        write_measurements_csv(os.path.join(out_dir, f"measurements_cell{cell.index}.csv"), windows, Z_sets)


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as err:
        print(f"error: cannot read config {args.config}: {err.strerror}", file=sys.stderr)
        return 2
    try:
        spec = parse_config(text)
    except ConfigError as err:
        where = f"{args.config}:{err.line}: " if err.line else f"{args.config}: "
        print(f"error: {where}{err}", file=sys.stderr)
        return 2
    exp = spec.experiment
    updates = {}
    if args.runs is not None:
        updates["n_runs"] = args.runs
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.filters:
        names = tuple(v.strip() for v in args.filters.split(",") if v.strip())
        if not names or any(n not in FILTERS for n in names):
            print(f"error: --filters must be a subset of {','.join(FILTERS)}", file=sys.stderr)
            return 2
        updates["filters"] = names
    try:
        exp = replace(exp, **updates)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    spec = replace(spec, experiment=exp)
    if args.dump_measurements:
        dump_measurements(spec, os.path.join(args.out, "measurements"))
    writers = _Writers(args.out)
    try:
        for cell in spec.cells():
            records = run_monte_carlo(exp, cell, args.workers)
            write_cell(writers, exp, cell, records)
            if not args.quiet:
                print(f"cell {cell.index}: N_w={cell.n_w} p_full={cell.p_full} "
                      f"clutter={cell.clutter_rate} done", file=sys.stderr)
    except Exception as err:
        print(f"error: run failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    finally:
        writers.close()
    return 0


def cmd_validate(args) -> int:
    results = run_suites(fault=getattr(args, "inject_fault", None))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:7.2f}s  {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmpmbm", description=__doc__.splitlines()[0])
    p.add_argument("--validate", action="store_true", help="run the oracle suites and exit")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run a Monte Carlo sweep")
    r.add_argument("--config", required=True, help="INI experiment file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--runs", type=int, help="override the number of Monte Carlo runs")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--filters", help="comma-separated subset of " + ",".join(FILTERS))
    r.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: TMPMBM_WORKERS or 1)")
    r.add_argument("--dump-measurements", action="store_true",
                   help="also write the measurement sets of run 0 of every cell")
    r.add_argument("--quiet", action="store_true")
    r.add_argument("--validate", action="store_true", help="run the oracle suites first")
    v = sub.add_parser("validate", help="run the oracle suites")
    v.add_argument("--inject-fault", choices=sorted(SUITES), help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.validate and args.command != "run":
        return cmd_validate(args)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "run":
        if args.validate:
            code = cmd_validate(args)
            if code:
                return code
        return cmd_run(args)
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
