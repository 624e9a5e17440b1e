"""Command-line driver: JSON run configurations, execution and result files.

A run configuration is a JSON object.  Only ``command`` is required; every
other key has a default (see ``DEFAULTS`` and the README).  Unknown keys are
rejected.  Each run writes CSV data and a ``manifest.json`` into the output
directory.  A manifest embeds the complete configuration and can be passed
back with ``--replay`` to regenerate byte-identical CSV files.

Output is staged in ``<out>/.partial``; on failure the staged files are
moved to ``<out>/quarantine`` and ``<out>/error.json`` records the error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import EnsembleConfig, SweepParams, run_ensemble
from .errors import ParseError, ValidationError, XYAnnealError
from .geometry import (
    DISORDER_PRESETS,
    MAX_PACKING_FRACTION,
    CouplingMatrix,
    DisorderTarget,
    disorder_stats,
    sample_disordered,
)
from .operators import MAX_SPINS
from .protocols import (
    DEFAULT_HOLD_STEP,
    DEFAULT_MEASURE_DELAY,
    DEFAULT_OMEGA_X0,
    DEFAULT_PROBE,
    DEFAULT_PROBE_GRID,
    DEFAULT_STEADY_WINDOW,
    DEFAULT_STEP,
    DEFAULT_WAIT,
    ProtocolParams,
    is_symmetric_grid,
    in_medium_units,
    run_protocol,
)
from .spectra import level_diagram, magnetization_spectrum

SCHEMA_VERSION = 1
COMMANDS = ("sample", "scan-energy", "protocol", "sweep", "spectrum", "levels")
#: Largest system accepted for the ensemble commands.
MAX_SWEEP_SPINS = 12

# canonical defaults; nested blocks are merged key by key
DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "command": None,
    "n": 8,
    "seed": 0,
    "couplings": None,  # None: sample; "zero": J = 0; or an explicit N x N matrix
    "sampling": {"regime": "strong", "packing_fraction": None, "target": None, "tolerance": None},
    "protocol": {
        "kind": "ZFA",
        "omega_x0": DEFAULT_OMEGA_X0,
        "ramp_speed": 1.0,
        "wait_time": DEFAULT_WAIT,
        "measure_delay": DEFAULT_MEASURE_DELAY,
        "probe": DEFAULT_PROBE,
        "steady_window": DEFAULT_STEADY_WINDOW,
    },
    "sweep": {
        "ramp_speeds": [0.03, 0.07, 0.15, 0.3, 0.7, 1.5, 5.0, 20.0],
        "probe_grid": list(DEFAULT_PROBE_GRID),
        "mirror": True,
    },
    "ensemble": {"n_realizations": 100, "max_failure_fraction": 0.2},
    "integrator": {"step": DEFAULT_STEP, "hold_step": DEFAULT_HOLD_STEP, "sample_every": 1},
    "spectrum": {"omega_y": DEFAULT_PROBE},
    "levels": {"omega_x_grid": [0.25 * k for k in range(81)], "sector": "even"},
}


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration; ``data`` is the fully defaulted document."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and canonical_json(self.data) == canonical_json(other.data)

    def __hash__(self):
        return hash(canonical_json(self.data))

    @property
    def command(self) -> str:
        return self.data["command"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.data).encode()).hexdigest()

    def with_seed(self, seed: int) -> "RunConfig":
        d = copy.deepcopy(self.data)
        d["seed"] = seed
        return validate(d)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# -- parsing and validation -------------------------------------------------------


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ValueError(f"duplicate key {k!r}")
        out[k] = v
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises:
        ParseError: malformed JSON (with line and column).
        ValidationError: unknown key, wrong type or out-of-range value.
    """
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1) from None
    return validate(doc)


def _fail(key: str, msg: str):
    raise ValidationError(msg, key)


def _real(v, key, lo=-math.inf, hi=math.inf, lo_open=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(key, f"{key} must be a finite number")
    if v < lo or v > hi or (lo_open and v == lo):
        _fail(key, f"{key}={v} is out of range")
    return float(v)


def _int(v, key, lo, hi) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(key, f"{key} must be an integer")
    if not lo <= v <= hi:
        _fail(key, f"{key}={v} must lie in [{lo}, {hi}]")
    return v


def _merge(defaults: dict, given, prefix: str) -> dict:
    if not isinstance(given, dict):
        _fail(prefix.rstrip("."), f"{prefix.rstrip('.')} must be an object")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            _fail(prefix + k, f"unknown key {prefix + k!r}")
        if isinstance(defaults[k], dict):
            out[k] = _merge(defaults[k], v, prefix + k + ".")
        else:
            out[k] = v
    return out


def validate(doc) -> RunConfig:
    """Fill defaults into a decoded document and check every value."""
    d = _merge(DEFAULTS, doc, "")
    if d["schema_version"] != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported schema_version {d['schema_version']!r}")
    if d["command"] not in COMMANDS:
        _fail("command", f"command must be one of {', '.join(COMMANDS)}")
    cmd = d["command"]
    cap = MAX_SWEEP_SPINS if cmd in ("sweep", "scan-energy") else MAX_SPINS
    d["n"] = _int(d["n"], "n", 1, cap)
    d["seed"] = _int(d["seed"], "seed", 0, 2**64 - 1)

    c = d["couplings"]
    if c is not None and c != "zero":
        try:
            CouplingMatrix(np.array(c, dtype=float))
        except (ValueError, TypeError) as exc:
            _fail("couplings", f"couplings: {exc}")
        if len(c) != d["n"]:
            _fail("couplings", "couplings must be an n x n matrix")
    if c is not None and cmd in ("sweep", "scan-energy"):
        _fail("couplings", "ensemble commands sample their couplings")

    s = d["sampling"]
    if s["regime"] is not None and s["regime"] not in DISORDER_PRESETS:
        _fail("sampling.regime", f"regime must be null or one of {sorted(DISORDER_PRESETS)}")
    if s["packing_fraction"] is not None:
        _real(s["packing_fraction"], "sampling.packing_fraction", 0.0, MAX_PACKING_FRACTION, lo_open=True)
    elif s["regime"] is None:
        _fail("sampling.packing_fraction", "set sampling.regime or sampling.packing_fraction")
    if s["target"] is not None:
        _real(s["target"], "sampling.target", 0.0)
    if s["tolerance"] is not None:
        _real(s["tolerance"], "sampling.tolerance", 0.0, lo_open=True)
    if (s["tolerance"] is None) != (s["target"] is None) and s["regime"] is None:
        _fail("sampling.tolerance", "target and tolerance must be given together")
    if d["n"] < 2 and c is None:
        _fail("n", "sampling needs at least two spins")

    p = d["protocol"]
    try:
        ProtocolParams(**p)
    except (TypeError, ValueError) as exc:
        _fail("protocol", f"protocol: {exc}")

    sw = d["sweep"]
    if not isinstance(sw["ramp_speeds"], list) or not sw["ramp_speeds"]:
        _fail("sweep.ramp_speeds", "sweep.ramp_speeds must be a nonempty list")
    for v in sw["ramp_speeds"]:
        _real(v, "sweep.ramp_speeds", 0.0, lo_open=True)
    if not isinstance(sw["probe_grid"], list):
        _fail("sweep.probe_grid", "sweep.probe_grid must be a list")
    for v in sw["probe_grid"]:
        _real(v, "sweep.probe_grid")
    if not is_symmetric_grid(np.array(sw["probe_grid"], dtype=float)):
        _fail("sweep.probe_grid", "probe grid must be 5 distinct fields symmetric about 0")
    if not isinstance(sw["mirror"], bool):
        _fail("sweep.mirror", "sweep.mirror must be true or false")

    e = d["ensemble"]
    _int(e["n_realizations"], "ensemble.n_realizations", 1, 10**6)
    _real(e["max_failure_fraction"], "ensemble.max_failure_fraction", 0.0, 1.0)

    it = d["integrator"]
    _real(it["step"], "integrator.step", 0.0, lo_open=True)
    if it["hold_step"] is not None:
        _real(it["hold_step"], "integrator.hold_step", 0.0, lo_open=True)
    _int(it["sample_every"], "integrator.sample_every", 1, 10**9)

    _real(d["spectrum"]["omega_y"], "spectrum.omega_y")
    lv = d["levels"]
    if not isinstance(lv["omega_x_grid"], list) or not lv["omega_x_grid"]:
        _fail("levels.omega_x_grid", "levels.omega_x_grid must be a nonempty list")
    for v in lv["omega_x_grid"]:
        _real(v, "levels.omega_x_grid")
    if lv["sector"] not in ("even", "odd"):
        _fail("levels.sector", "levels.sector must be even or odd")
    if cmd == "levels" and d["n"] < 2:
        _fail("n", "levels needs at least two spins")
    return RunConfig(d)


# -- building blocks ----------------------------------------------------------------


def disorder_target(cfg: RunConfig) -> DisorderTarget:
    s = cfg["sampling"]
    base = DISORDER_PRESETS[s["regime"]] if s["regime"] else DisorderTarget(s["packing_fraction"], 0.0, None)
    eta = s["packing_fraction"] if s["packing_fraction"] is not None else base.packing_fraction
    target = s["target"] if s["target"] is not None else base.target
    tol = s["tolerance"] if s["tolerance"] is not None else base.tolerance
    return DisorderTarget(eta, target, tol)


def realization_couplings(cfg: RunConfig) -> tuple[CouplingMatrix, dict]:
    """Couplings for the single-realization commands, plus provenance."""
    c = cfg["couplings"]
    if c == "zero":
        return CouplingMatrix.zeros(cfg["n"]), {"source": "zero"}
    if c is not None:
        return CouplingMatrix(np.array(c, dtype=float)), {"source": "explicit"}
    _, cm, draws = sample_disordered(cfg["n"], disorder_target(cfg), cfg["seed"])
    return cm, {"source": "sampled", "draws": draws}


def ensemble_config(cfg: RunConfig, kind: str) -> EnsembleConfig:
    p, sw, it, e = cfg["protocol"], cfg["sweep"], cfg["integrator"], cfg["ensemble"]
    sweep = SweepParams(
        kind=kind,
        ramp_speeds=tuple(sw["ramp_speeds"]),
        omega_x0=p["omega_x0"],
        probe_grid=tuple(sw["probe_grid"]),
        probe=p["probe"],
        wait_time=p["wait_time"],
        measure_delay=p["measure_delay"],
        steady_window=p["steady_window"],
        step=it["step"],
        hold_step=it["hold_step"],
        mirror=sw["mirror"],
    )
    return EnsembleConfig(cfg["seed"], cfg["n"], e["n_realizations"], disorder_target(cfg), sweep,
                          e["max_failure_fraction"])


# -- output ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _manifest(cfg: RunConfig, files: list[str], extra: dict) -> dict:
    return {
        "manifest_version": 1,
        "library_version": __version__,
        "command": cfg.command,
        "master_seed": cfg["seed"],
        "config_sha256": cfg.digest(),
        "config": cfg.data,
        "files": sorted(files),
        **extra,
    }


def _cmd_sample(cfg, out: Path):
    cm, prov = realization_couplings(cfg)
    files = ["couplings.csv", "stats.csv"]
    if prov["source"] == "sampled":
        pos, _, _ = sample_disordered(cfg["n"], disorder_target(cfg), cfg["seed"])
        write_csv(out / "positions.csv", ["i", "x", "y", "z"], [(i, *p) for i, p in enumerate(pos.positions)])
        files.append("positions.csv")
    n = cm.n_spins
    write_csv(out / "couplings.csv", ["i", "j", "J"], [(i, k, cm.j[i, k]) for i in range(n) for k in range(n)])
    st = disorder_stats(cm) if n > 1 else None
    rows = [(st.j_med, st.sigma_j, st.relative_disorder)] if st else []
    write_csv(out / "stats.csv", ["j_med", "sigma_j", "sigma_over_j_med"], rows)
    return files, {"couplings": prov}


def _summary_rows(summary, names):
    for g, _ in enumerate(summary.grid):
        row = []
        for name in names:
            st = summary.stats[name]
            row += [st.mean[g], st.std[g], st.sem[g]]
        yield row


def _cmd_scan_energy(cfg, out: Path, threads: int):
    ecfg = ensemble_config(cfg, "energy")
    summary = run_ensemble(ecfg, threads)
    names = ["epsilon", "eps_over_mean_eg", "eps_over_eg"]
    header = ["v_r", "t_r"] + [f"{n}_{s}" for n in names for s in ("mean", "std", "sem")]
    om = cfg["protocol"]["omega_x0"]
    rows = [[v, om / v, *r] for v, r in zip(summary.grid, _summary_rows(summary, names))]
    write_csv(out / "scan.csv", header, rows)
    _write_realizations(out, summary, ["epsilon", "eps_over_eg"])
    return ["scan.csv", "realizations.csv"], _ensemble_extra(ecfg, summary)


def _cmd_sweep(cfg, out: Path, threads: int):
    ecfg = ensemble_config(cfg, "hysteresis")
    summary = run_ensemble(ecfg, threads)
    st = summary.stats
    gap_sem = summary.combined_sem("chi_zfa", "chi_fa")
    om = cfg["protocol"]["omega_x0"]
    header = ["v_r", "t_r", "eps_over_eg", "abs_eps_over_eg", "eps_over_eg_sem",
              "eps_over_eg_per_realization", "eps_over_eg_per_realization_sem",
              "chi_zfa", "chi_zfa_err", "chi_fa", "chi_fa_err", "chi_gap", "chi_gap_sem", "n_effective"]
    rows = []
    for g, v in enumerate(summary.grid):
        e = st["eps_over_mean_eg"]
        rows.append([
            v, om / v, e.mean[g], abs(e.mean[g]), e.sem[g],
            st["eps_over_eg"].mean[g], st["eps_over_eg"].sem[g],
            st["chi_zfa"].mean[g], st["chi_zfa"].sem[g], st["chi_fa"].mean[g], st["chi_fa"].sem[g],
            st["chi_fa"].mean[g] - st["chi_zfa"].mean[g], gap_sem[g], summary.n_effective,
        ])
    write_csv(out / "sweep.csv", header, rows)
    _write_realizations(out, summary, ["epsilon", "eps_over_eg", "chi_zfa", "chi_zfa_fit_err",
                                       "chi_fa", "chi_fa_fit_err"])
    return ["sweep.csv", "realizations.csv"], _ensemble_extra(ecfg, summary)


def _write_realizations(out: Path, summary, names):
    header = ["realization", "seed", "ground_energy", "sigma_over_j_med", "v_r"] + names
    rows = []
    for r in summary.realizations:
        for g, v in enumerate(summary.grid):
            rows.append([r.index, r.seed, r.info["ground_energy"], r.info["relative_disorder"], v]
                        + [r.values[n][g] for n in names])
    write_csv(out / "realizations.csv", header, rows)


def _ensemble_extra(ecfg: EnsembleConfig, summary) -> dict:
    return {
        "realization_seeds": [str(s) for s in ecfg.seeds()],
        "n_effective": summary.n_effective,
        "failed_realizations": [{"index": i, "seed": str(s), "error": m} for i, s, m in summary.failed_realizations],
        "mean_ground_energy": summary.mean_ground_energy if math.isfinite(summary.mean_ground_energy) else None,
    }


def _cmd_protocol(cfg, out: Path):
    cm, prov = realization_couplings(cfg)
    it = cfg["integrator"]
    params = ProtocolParams(**cfg["protocol"])
    traj, steady = run_protocol(cm, params, it["step"], it["sample_every"], it["hold_step"])
    with open(out / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
        traj.to_csv(fh)
    write_csv(out / "steady.csv", ["kind", "v_r", "t_r", "probe", "steady_m_y"],
              [(params.kind, params.ramp_speed, params.ramp_time, params.probe, steady)])
    return ["trajectory.csv", "steady.csv"], {"couplings": prov}


def _cmd_spectrum(cfg, out: Path):
    cm, prov = realization_couplings(cfg)
    rows = magnetization_spectrum(in_medium_units(cm), cfg["spectrum"]["omega_y"])
    write_csv(out / "spectrum.csv", ["k", "energy_per_spin", "m_y"], [(k, e, m) for k, (e, m) in enumerate(rows)])
    return ["spectrum.csv"], {"couplings": prov}


def _cmd_levels(cfg, out: Path):
    cm, prov = realization_couplings(cfg)
    lv = cfg["levels"]
    diagram = level_diagram(in_medium_units(cm), lv["omega_x_grid"], lv["sector"])
    rows = [(s.omega_x, k, e, o) for s in diagram for k, (e, o) in enumerate(zip(s.energies, s.overlaps))]
    write_csv(out / "levels.csv", ["omega_x", "k", "energy", "overlap"], rows)
    return ["levels.csv"], {"couplings": prov}


def execute(cfg: RunConfig, out_dir, threads: int = 1) -> int:
    """Run one configuration; returns the process exit status.

    Files are staged and only moved into ``out_dir`` once the run succeeded.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = out / ".partial"
    if stage.exists():
        shutil.rmtree(stage)
    stage.mkdir()
    (out / "error.json").unlink(missing_ok=True)
    try:
        cmd = cfg.command
        if cmd == "sample":
            files, extra = _cmd_sample(cfg, stage)
        elif cmd == "scan-energy":
            files, extra = _cmd_scan_energy(cfg, stage, threads)
        elif cmd == "sweep":
            files, extra = _cmd_sweep(cfg, stage, threads)
        elif cmd == "protocol":
            files, extra = _cmd_protocol(cfg, stage)
        elif cmd == "spectrum":
            files, extra = _cmd_spectrum(cfg, stage)
        else:
            files, extra = _cmd_levels(cfg, stage)
        with open(stage / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(_manifest(cfg, files, extra), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except Exception as exc:  # noqa: BLE001
        code = exc.exit_code if isinstance(exc, XYAnnealError) else 1
        quarantine = out / "quarantine"
        if quarantine.exists():
            shutil.rmtree(quarantine)
        stage.rename(quarantine)
        _write_error(out, exc, code)
        return code
    for f in [*files, "manifest.json"]:
        os.replace(stage / f, out / f)
    shutil.rmtree(stage)
    return 0


def _write_error(out: Path, exc: BaseException, code: int) -> None:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "column", "key"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    with open(out / "error.json", "w", encoding="utf-8") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or "config" not in doc:
        raise ValidationError("not a manifest (no 'config' entry)", "config")
    return validate(doc["config"])


# -- command line -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="xyanneal",
        description="Annealing and hysteresis simulations of disordered dipolar XY spin systems.",
    )
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON run configuration")
    src.add_argument("--replay", help="manifest.json of an earlier run to reproduce")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for ensembles (default 1)")
    ap.add_argument("--seed", type=int, default=None, help="override the configured seed (u64)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.replay:
            cfg = load_manifest(args.replay)
        else:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1", "threads")
    except (XYAnnealError, OSError) as exc:
        code = exc.exit_code if isinstance(exc, XYAnnealError) else 2
        out.mkdir(parents=True, exist_ok=True)
        _write_error(out, exc, code)
        print(f"xyanneal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    code = execute(cfg, out, args.threads)
    if code:
        with open(out / "error.json", encoding="utf-8") as fh:
            rec = json.load(fh)
        print(f"xyanneal: {rec['error']}: {rec['message']}", file=sys.stderr)
    return code


__all__ = ["DEFAULTS", "RunConfig", "execute", "load_manifest", "main", "parse_config", "validate"]
