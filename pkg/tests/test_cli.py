import csv
import json
import subprocess
import sys

import pytest

from twowave.cli import run, sha256
from twowave.config import config_from_dict

SMALL = """
[grid]
n_points = 600
r_max = 12.0
"""

FAST_EVOLUTION = """
[evolution]
adaptive = true
blowup_threshold = 3.0
t_end = 3.0
snapshot_stride = 5000
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_init_writes_loadable_template(tmp_path):
    assert run(["init", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "config.toml").exists()
    assert run(["init", "--config", str(tmp_path / "x" / "mine.toml")]) == 0
    assert (tmp_path / "x" / "mine.toml").read_text().startswith("#")


def test_ground_state_both_methods(tmp_path):
    cfg = write(tmp_path, SMALL + '[solver]\nmethod = "both"\n')
    out = tmp_path / "gs"
    assert run(["ground-state", "--config", str(cfg), "--out", str(out)]) == 0
    m = manifest(out)
    for name, digest in m["outputs"].items():
        assert sha256(out / name) == digest
    assert m["results"]["cross_method_linf"] <= 1e-3
    # the residual gates are calibrated for the canonical grid, not this coarse one
    assert {"variational.q_residual", "shooting.ode_residual"} <= set(m["checks"])
    assert m["results"]["action_M0"] > 0
    assert m["version"] and m["started"] <= m["finished"]


def test_ground_state_canonical(tmp_path):
    out = tmp_path / "gs"
    assert run(["ground-state", "--out", str(out)]) == 0
    m = manifest(out)
    assert all(c["passed"] for c in m["checks"].values()), m["checks"]
    assert (out / "ground_state.txt").exists()


def test_ground_state_n4_is_validation_error(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "[params]\ndim = 4.0\n")
    assert run(["ground-state", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "UnsupportedDimension" in capsys.readouterr().err


def test_missing_config_is_io_error(tmp_path):
    assert run(["evolve", "--config", str(tmp_path / "none.toml")]) == 4


def test_bad_seed_is_validation_error(tmp_path):
    assert run(["evolve", "--seed", "-3", "--out", str(tmp_path)]) == 2


def test_evolve_c1_n4(tmp_path):
    cfg = write(tmp_path, SMALL + FAST_EVOLUTION + '[params]\ndim = 4.0\n[initial]\nfamily = "seeded-c1"\n')
    out = tmp_path / "c1"
    assert run(["evolve", "--config", str(cfg), "--out", str(out), "--seed", "2"]) == 0
    r = manifest(out)["results"]
    assert r["termination"] == "BlowUpDetected"
    assert r["t_detect"] > 0 and r["T_star"] > 0
    assert r["criterion"]["variant"] == "C1"
    assert (out / "trajectory.csv").exists() and (out / "snapshot_0000.txt").exists()


def test_evolve_standing_wave_reports_gates(tmp_path):
    cfg = write(tmp_path, SMALL + '[evolution]\nt_end = 0.02\n[initial]\nfamily = "ground-state"\n')
    out = tmp_path / "sw"
    assert run(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
    m = manifest(out)
    assert m["results"]["termination"] == "Completed"
    assert {"modulus", "phase_phi", "phase_psi"} <= set(m["checks"])
    assert m["results"]["criterion"]["variant"] is None


def test_evolve_malformed_initial_file(tmp_path, capsys):
    bad = tmp_path / "init.csv"
    bad.write_text("r,phi\n0,1\nxx,yy\n")
    cfg = write(tmp_path, SMALL + f'[initial]\nfamily = "file"\nfile = "{bad}"\n')
    assert run(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    assert capsys.readouterr().err.startswith("error: DataFileError")


def test_evolve_from_snapshot_file(tmp_path):
    cfg = write(tmp_path, SMALL + '[evolution]\nt_end = 0.01\nsnapshot_stride = 5\n[initial]\nfamily = "gaussian"\n')
    first = tmp_path / "a"
    assert run(["evolve", "--config", str(cfg), "--out", str(first)]) == 0
    snap = sorted(first.glob("snapshot_*.txt"))[-1]
    cfg2 = write(tmp_path, SMALL + f'[evolution]\nt_end = 0.01\n[initial]\nfamily = "file"\nfile = "{snap}"\n',
                 "b.toml")
    assert run(["evolve", "--config", str(cfg2), "--out", str(tmp_path / "b")]) == 0
    assert str(snap) in manifest(tmp_path / "b")["inputs"]


def test_blowup_classify(tmp_path):
    cfg = write(tmp_path, SMALL + '[initial]\nfamily = "gaussian"\namp_phi = 9.0\namp_psi = -9.0\n')
    out = tmp_path / "bc"
    assert run(["blowup-classify", "--config", str(cfg), "--out", str(out)]) == 0
    crit = json.loads((out / "criterion.json").read_text())
    assert crit["variant"] == "C1" and {"E0", "J", "R", "T_star"} <= set(crit)


def test_instability_command(tmp_path):
    cfg = write(tmp_path, SMALL + FAST_EVOLUTION + "[instability]\nlam = 1.3\n")
    out = tmp_path / "inst"
    assert run(["instability", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "instability_report.json").read_text())
    assert rep["termination"] == "BlowUpDetected" and not rep["violations"]
    assert rep["trajectory_csv"] == "trajectory.csv"
    assert all(c["passed"] for c in manifest(out)["checks"].values())


def test_sweep_mixed_rows(tmp_path):
    cfg = write(tmp_path, SMALL + FAST_EVOLUTION + '[sweep]\nexperiment = "instability"\naxis = "lambda"\n'
                "values = [1.2, 0.5, 1.5]\n")
    out = tmp_path / "sweep"
    assert run(["sweep", "--config", str(cfg), "--out", str(out), "--workers", "2"]) == 0
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert [r["index"] for r in rows] == ["0", "1", "2"]
    assert [r["status"] for r in rows] == ["ok", "ValidationError", "ok"]
    assert rows[0]["termination"] == rows[2]["termination"] == "BlowUpDetected"
    assert float(rows[2]["t_detect"]) < float(rows[0]["t_detect"])
    assert manifest(out)["results"]["t_detect_decreasing"] is True
    assert (out / "run_000" / "instability_report.json").exists()


def test_sweep_empty_values(tmp_path):
    cfg = write(tmp_path, SMALL + "[sweep]\nvalues = []\n")
    assert run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_manifest_config_reruns(tmp_path):
    cfg = write(tmp_path, SMALL + '[evolution]\nt_end = 0.02\n[initial]\nfamily = "gaussian"\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["evolve", "--config", str(cfg), "--out", str(a)]) == 0
    echoed = config_from_dict(manifest(a)["config"])
    import tomli_w

    (tmp_path / "echo.toml").write_text(tomli_w.dumps(echoed.to_dict()))
    assert run(["evolve", "--config", str(tmp_path / "echo.toml"), "--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert manifest(a)["results"] == manifest(b)["results"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "twowave", "init", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "config.toml").exists()


def test_unknown_command():
    with pytest.raises(SystemExit):
        run(["frobnicate"])
