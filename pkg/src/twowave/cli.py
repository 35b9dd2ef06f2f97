"""Command-line entry point: ``twowave <command> --config run.toml --out DIR``.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, RunConfig, config_from_dict, load_config, template
from .errors import DataFileError, NoProjection, NumericalFault, SolverFailure, ValidationError
from .evolution import standing_wave_run, write_trajectory_csv, evolve
from .functionals import FieldPair, PhysParams, rescale
from .groundstate import GroundState, load_ground_state, save_ground_state, solve_shooting, solve_variational
from .initial import gaussian_pair, load_pair, save_snapshot, seeded_c1_pair
from .instability import InstabilityRunSpec, run_instability
from .virial import classify_blowup, envelope

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

# gates reported in ground-state manifests
GATE_IDENTITY = 1e-5
GATE_ODE = 1e-6
GATE_CROSS = 1e-3
# standing-wave gates
GATE_MODULUS = 1e-4
GATE_PHASE = 1e-3


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, cfg: RunConfig, started: str, inputs, outputs,
                   results: dict, checks: dict) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "started": started,
        "finished": _now(),
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "results": results,
        "checks": checks,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return path


def _check(passed, value, bound) -> dict:
    return {"passed": bool(passed), "value": value, "bound": bound}


# ---------------------------------------------------------------- ground states

def _solve(cfg: RunConfig, method: str) -> GroundState:
    p, g = cfg.params, cfg.make_grid()
    if method == "shooting":
        return solve_shooting(p, g, tuple(cfg.solver.guess))
    return solve_variational(p, g, cfg.flow_config())


def _ground_state(cfg: RunConfig, inputs: list) -> GroundState:
    """Load the configured ground-state file, or solve with the configured method."""
    path = cfg.solver.ground_state_file
    if path:
        gs = load_ground_state(path)
        inputs.append(Path(path))
        if gs.params != cfg.params:
            raise ValidationError(f"{path} was computed for different physical parameters")
        if (gs.grid.n_points, gs.grid.r_max) != (cfg.grid.n_points, cfg.grid.r_max):
            raise ValidationError(f"{path} was computed on a different grid")
        return gs
    return _solve(cfg, "shooting" if cfg.solver.method == "shooting" else "variational")


def _gs_checks(gs: GroundState) -> dict:
    rep, p = gs.report, gs.params
    return {
        "q_residual": _check(abs(rep.q_residual) <= GATE_IDENTITY, rep.q_residual, GATE_IDENTITY),
        "pohozaev_residual": _check(abs(rep.pohozaev_residual) <= GATE_IDENTITY,
                                       rep.pohozaev_residual, GATE_IDENTITY),
        "scaling_identity_residual": _check(abs(rep.scaling_identity_residual) <= GATE_IDENTITY,
                                        rep.scaling_identity_residual, GATE_IDENTITY),
        "ode_residual": _check(rep.ode_residual <= GATE_ODE, rep.ode_residual, GATE_ODE),
        "decay_xi_lower": _check(rep.decay_rate_xi >= 0.5 * math.sqrt(2 * p.m1 * p.omega1),
                                 rep.decay_rate_xi, 0.5 * math.sqrt(2 * p.m1 * p.omega1)),
        "decay_eta_lower": _check(rep.decay_rate_eta >= 0.5 * math.sqrt(2 * p.m2 * p.omega2),
                                  rep.decay_rate_eta, 0.5 * math.sqrt(2 * p.m2 * p.omega2)),
        "positive_monotone": _check(rep.positive and rep.monotone, None, None),
    }


def cmd_ground_state(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    methods = ("variational", "shooting") if cfg.solver.method == "both" else (cfg.solver.method,)
    solved, outputs, results, checks = {}, [], {}, {}
    for m in methods:
        gs = _solve(cfg, m)
        solved[m] = gs
        outputs.append(save_ground_state(gs, out / f"ground_state_{m}.txt"))
        results[m] = {"action_M0": gs.action_M0, "report": gs.report.to_dict(),
                      "origin": [float(gs.xi[0]), float(gs.eta[0])]}
        checks.update({f"{m}.{k}": v for k, v in _gs_checks(gs).items()})
    primary = solved[methods[0]]
    outputs.append(save_ground_state(primary, out / "ground_state.txt"))
    if len(solved) == 2:
        a, b = solved["variational"].xi, solved["shooting"].xi
        dist = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        results["cross_method_linf"] = dist
        checks["cross_method_linf"] = _check(dist <= GATE_CROSS, dist, GATE_CROSS)
    results["action_M0"] = primary.action_M0
    return {"outputs": outputs, "results": results, "checks": checks, "inputs": []}


# ---------------------------------------------------------------- evolution

def _initial_pair(cfg: RunConfig, inputs: list) -> tuple[FieldPair, GroundState | None]:
    ini, g = cfg.initial, cfg.make_grid()
    if ini.family == "gaussian":
        return gaussian_pair(g, ini.amp_phi, ini.amp_psi, ini.width, ini.chirp), None
    if ini.family == "seeded-c1":
        return seeded_c1_pair(cfg.seed, cfg.params, g), None
    if ini.family == "file":
        if not ini.file:
            raise ValidationError("initial.family = 'file' needs initial.file")
        pair = load_pair(ini.file)
        inputs.append(Path(ini.file))
        if pair.grid.dim != cfg.params.dim:
            raise ValidationError(f"{ini.file} has dimension {pair.grid.dim}, params say {cfg.params.dim}")
        return pair, None
    gs = _ground_state(cfg, inputs)
    if ini.family == "ground-state":
        return gs.pair, gs
    return rescale(gs.pair, ini.lam), gs


def _classification(pair: FieldPair, p: PhysParams) -> dict:
    try:
        return classify_blowup(pair, p, pair.grid).to_dict()
    except ValidationError as exc:
        return {"variant": None, "skipped": str(exc)}


def _write_snapshots(rec, out: Path) -> list:
    paths = []
    for k, (t, pair) in enumerate(rec.snapshots):
        paths.append(save_snapshot(pair, t, out / f"snapshot_{k:04d}.txt"))
    return paths


def _drifts(rec) -> dict:
    return {"mass": rec.max_relative_drift("mass"), "energy": rec.max_relative_drift("energy")}


def cmd_evolve(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    inputs: list = []
    pair, gs = _initial_pair(cfg, inputs)
    g, p = pair.grid, cfg.params
    crit = _classification(pair, p)
    checks = {}
    if cfg.initial.family == "ground-state":
        # the unperturbed ground state is a standing wave: report its gates too
        rec, sw_results, checks = _standing_wave(gs, cfg)
    else:
        rec, sw_results = evolve(pair, p, g, cfg.evolution_config()), {}
    outputs = [write_trajectory_csv(rec, out / "trajectory.csv")] + _write_snapshots(rec, out)
    term = rec.termination
    results = {
        **sw_results,
        "termination": term.status,
        "t_final": term.t,
        "t_detect": term.t if term.status == "BlowUpDetected" else None,
        "T_star": crit.get("T_star"),
        "criterion": crit,
        "drift": _drifts(rec),
        "steps": rec.steps,
    }
    if crit.get("variant") is not None or "E0" in crit:
        t = rec.times
        env = envelope(t, crit["G0"], crit["Gp0"], crit["E0"], p.m1, p.dim)
        results["envelope_excess"] = float(np.max(rec.column("G") - env))
    return {"outputs": outputs, "results": results, "checks": checks, "inputs": inputs}


def _standing_wave(gs: GroundState, cfg: RunConfig):
    p = cfg.params
    rep = standing_wave_run(gs.xi, gs.eta, p, gs.grid, cfg.evolution_config())
    results = rep.to_dict()
    checks = {
        "modulus": _check(rep.max_modulus_deviation <= GATE_MODULUS, rep.max_modulus_deviation, GATE_MODULUS),
        "phase_phi": _check(abs(rep.slope_phi - p.omega1) <= GATE_PHASE, rep.slope_phi, p.omega1),
        "phase_psi": _check(abs(rep.slope_psi - 2 * p.omega1) <= GATE_PHASE, rep.slope_psi, 2 * p.omega1),
    }
    return rep.record, results, checks


def cmd_standing_wave(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    inputs: list = []
    gs = _ground_state(cfg, inputs)
    rec, results, checks = _standing_wave(gs, cfg)
    outputs = [write_trajectory_csv(rec, out / "trajectory.csv")]
    results["drift"] = _drifts(rec)
    return {"outputs": outputs, "results": results, "checks": checks, "inputs": inputs}


def cmd_blowup_classify(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    inputs: list = []
    pair, _ = _initial_pair(cfg, inputs)
    crit = classify_blowup(pair, cfg.params, pair.grid)
    path = out / "criterion.json"
    path.write_text(json.dumps(_jsonable(crit.to_dict()), indent=2, sort_keys=True) + "\n")
    return {"outputs": [path], "results": {"criterion": crit.to_dict()}, "checks": {}, "inputs": inputs}


def cmd_instability(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    inputs: list = []
    gs = _ground_state(cfg, inputs)
    rep = run_instability(InstabilityRunSpec(cfg.instability.lam, cfg.evolution_config()), gs, cfg.params)
    csv_path = write_trajectory_csv(rep.record, out / "trajectory.csv")
    rep.trajectory_csv = csv_path.name
    json_path = rep.write_json(out / "instability_report.json")
    checks = {k: _check(v.passed, v.worst_margin, 0.0) for k, v in rep.checks.items()}
    results = rep.to_dict()
    results["drift"] = _drifts(rep.record)
    return {"outputs": [csv_path, json_path], "results": results, "checks": checks, "inputs": inputs}


# ---------------------------------------------------------------- sweep

SUMMARY_COLUMNS = ("index", "axis", "value", "status", "criterion", "termination", "t_detect",
                   "mass_drift", "energy_drift", "message")


def _sweep_child(cfg: RunConfig, value: float) -> RunConfig:
    c = copy.deepcopy(cfg)
    axis = c.sweep.axis
    c.experiment = c.sweep.experiment
    if axis == "lambda":
        c.instability.lam = value
        c.initial.lam = value
    elif axis == "dim":
        c.params = c.params.replace(dim=value)
    else:
        ratio = c.initial.amp_psi / c.initial.amp_phi if c.initial.amp_phi else -1.0
        c.initial.amp_phi = value
        c.initial.amp_psi = ratio * value
    return c


def _sweep_task(args) -> dict:
    index, cfg_dict, value, subdir = args
    row = {k: "" for k in SUMMARY_COLUMNS}
    row.update(index=index, value=value)
    try:
        cfg = config_from_dict(cfg_dict)
        row["axis"] = cfg.sweep.axis
        child = _sweep_child(cfg, value).validate()
        sub = Path(subdir)
        sub.mkdir(parents=True, exist_ok=True)
        res = COMMANDS[child.experiment](child, sub)
        r = res["results"]
        crit = r.get("criterion") or {}
        variant = crit.get("variant") or ("K1" if r.get("initial_member") else "")
        row.update(status="ok", criterion=variant,
                   termination=r.get("termination", ""),
                   t_detect="" if r.get("t_detect") is None else repr(float(r["t_detect"])))
        drift = r.get("drift")
        if drift:
            row.update(mass_drift=repr(float(drift["mass"])), energy_drift=repr(float(drift["energy"])))
    except Exception as exc:  # noqa: BLE001  a failed run is a row, not a failed sweep
        row.update(status=type(exc).__name__, message=str(exc))
    return row


def _available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def cmd_sweep(cfg: RunConfig, out: Path, workers: int | None = None) -> dict:
    values = list(cfg.sweep.values)
    if not values:
        raise ValidationError("sweep.values must not be empty")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"sweep values must be numbers, got {v!r}")
    inputs: list = []
    base = copy.deepcopy(cfg)
    needs_gs = base.sweep.experiment == "instability" or base.initial.family in ("ground-state", "scaled-ground-state")
    if needs_gs and base.sweep.axis != "dim" and not base.solver.ground_state_file:
        gs = _ground_state(base, inputs)
        path = save_ground_state(gs, out / "ground_state.txt")
        base.solver.ground_state_file = str(path.resolve())
    tasks = [(i, base.to_dict(), float(v), str(out / f"run_{i:03d}")) for i, v in enumerate(values)]
    n_workers = workers or _available_cpus()
    if n_workers == 1 or len(tasks) == 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    summary = out / "summary.csv"
    with summary.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)
    t_det = [float(r["t_detect"]) for r in rows if r["t_detect"] != ""]
    results = {
        "rows": len(rows),
        "failures": sum(r["status"] != "ok" for r in rows),
        "t_detect": t_det,
        # over the rows that detected blow-up, in index order; reported, not enforced
        "t_detect_decreasing": bool(len(t_det) > 1 and np.all(np.diff(t_det) < 0)),
    }
    return {"outputs": [summary], "results": results, "checks": {}, "inputs": inputs}


COMMANDS = {
    "ground-state": cmd_ground_state,
    "evolve": cmd_evolve,
    "standing-wave": cmd_standing_wave,
    "blowup-classify": cmd_blowup_classify,
    "instability": cmd_instability,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twowave", description="Two-wave quadratic NLS laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("init",) + EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML run configuration")
        sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        sp.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed, unsigned 64-bit")
    return ap


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "init":
            target = args.config or (args.out or Path(".")) / "config.toml"
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(template())
            print(target)
            return EXIT_OK
        cfg = load_config(args.config) if args.config else RunConfig().validate()
        cfg.experiment = args.command
        if args.out is not None:
            cfg.output_dir = str(args.out)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None and args.workers < 1:
            raise ValidationError("--workers must be positive")
        cfg.validate()
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        started = _now()
        res = COMMANDS[args.command](cfg, out, args.workers)
        path = write_manifest(out, args.command, cfg, started, res["inputs"], res["outputs"],
                              res["results"], res["checks"])
        print(path)
        return EXIT_OK
    except (DataFileError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverFailure, NumericalFault, NoProjection) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
