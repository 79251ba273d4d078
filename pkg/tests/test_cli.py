import csv
import json
import math
import os
import subprocess
import sys

import pytest

from oscillametric import cli

NEWTON = json.dumps({"kind": "newtonian", "parameters": {"potential": {"type": "point_mass", "m": 1.0}}})
NEUTRAL = json.dumps({"kind": "neutral"})


def run(argv, capsys):
    code = cli.dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_chsh_reaches_two_root_two(capsys):
    code, out, _ = run(["chsh", "--angles", f"0,{math.pi / 2},{math.pi / 4},{-math.pi / 4}"], capsys)
    assert code == 0
    assert abs(abs(json.loads(out)["S"]) - 2 * math.sqrt(2)) <= 1e-12


def test_spectral_verify_succeeds(capsys):
    code, out, _ = run(["spectral", "--p", "1", "--verify"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["dim"] == 4 and all(doc["verify"]["checks"].values())


@pytest.mark.parametrize("argv", [
    ["chsh", "--bogus", "1"],
    [],
    ["prob"],
    ["verify-all", "--profile", ""],
    ["spectral"],
])
def test_usage_errors_exit_64(argv, capsys):
    assert run(argv, capsys)[0] == cli.EXIT_USAGE


def test_zero_state_is_invalid(capsys):
    code, _, err = run(["sterngerlach", "--theta", "0.3", "--state", "0,0,0,0"], capsys)
    assert code == cli.EXIT_VALIDATION
    assert "invalid input" in err


def test_unknown_config_key_is_invalid(capsys):
    cfg = json.dumps({"command": "chsh", "params": {"angles": "0,1,2,3"}, "colour": "red"})
    assert run(["--config", cfg], capsys)[0] == cli.EXIT_VALIDATION


def test_config_runs_command_and_records_seed(capsys, tmp_path):
    path = tmp_path / "out.json"
    cfg = {"command": "kg", "params": {"M": 1.0, "points": 5}, "seed": 17, "out_path": str(path)}
    code, out, _ = run(["--config", json.dumps(cfg)], capsys)
    assert code == 0
    assert json.loads(out)["seed"] == 17
    assert path.read_text() == out


def test_tol_overrides_rejected_outside_verify_all(capsys):
    cfg = json.dumps({"command": "chsh", "params": {"angles": "0,1,2,3"}, "tol_overrides": {"chsh": 1e-3}})
    assert run(["--config", cfg], capsys)[0] == cli.EXIT_VALIDATION


def test_identical_runs_are_byte_identical(capsys):
    argv = ["sample", "--n", "2000", "--seed", "5"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b
    assert json.loads(a)["seed"] == 5
    assert run(["sample", "--n", "2000", "--seed", "6"], capsys)[1] != a


def test_geodesic_csv(capsys, tmp_path):
    path = tmp_path / "orbit.csv"
    code, out, _ = run(["geodesic", "--metric", NEWTON, "--x0", "1,0,0", "--v0", "0,1,0", "--steps", "200",
                        "--ds", "0.01", "--stride", "10", "--csv", str(path)], capsys)
    assert code == 0
    rows = list(csv.reader(path.open()))
    assert len(rows) == 1 + 21
    assert abs(json.loads(out)["K_drift"]) < 1e-8


def test_kg_evolve_csv(capsys, tmp_path):
    path = tmp_path / "kg.csv"
    code, out, _ = run(["kg", "--evolve", "--n", "256", "--sigma", "20", "--steps", "20", "--stride", "10",
                        "--csv", str(path)], capsys)
    assert code == 0
    assert json.loads(out)["norm_drift"] < 1e-10
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "x", "re_psi", "im_psi"]
    assert len(rows) == 1 + 3 * 256


def test_curvature_csv_for_several_points(capsys, tmp_path):
    path = tmp_path / "curv.csv"
    code, out, _ = run(["curvature", "--potential", NEUTRAL, "--point", "0,1,0,0,0,0;0,2,0,0,0,0",
                        "--csv", str(path)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["reports"]) == 2
    rows = list(csv.reader(path.open()))
    assert len(rows) == 3
    assert all(float(r[-3]) == 0.0 for r in rows[1:])


def test_sample_csv(capsys, tmp_path):
    path = tmp_path / "pts.csv"
    code, _, _ = run(["sample", "--n", "500", "--csv", str(path)], capsys)
    assert code == 0
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x1", "x2", "x3"] and len(rows) == 501


def test_prob_box_and_counts(capsys):
    code, out, _ = run(["prob", "--N", "1000", "--p", "0.002", "--k", "2", "--omega", "0,0,0:1,1,1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["binomial"] - doc["poisson_limit"]) < 1e-3
    assert 0 < doc["region_probability"] < 1


def test_floats_written_with_full_precision(capsys):
    _, out, _ = run(["sterngerlach", "--theta", "0.3", "--state", "0.1"], capsys)
    doc = json.loads(out)
    assert doc["p1"] == pytest.approx(math.cos(0.1) ** 2, abs=1e-15)


def test_console_entry_point_runs():
    env = {**os.environ, "PYTHONHASHSEED": "0"}
    proc = subprocess.run([sys.executable, "-m", "oscillametric", "chsh", "--angles", "0,0,0,0"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["rule"] == "example1"
