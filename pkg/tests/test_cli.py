import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from erlangcev.cli import main, sweep_rows
from erlangcev.model import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
UNIFORM = str(CONFIGS / "reference_uniform.json")
EXPONENTIAL = str(CONFIGS / "reference_exponential.json")


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


def test_verify_reference(capsys):
    code, out = run(capsys, "verify", "--config", UNIFORM)
    assert code == 0
    assert "iota = 0.01777" in out.out and "result: condition 1" in out.out


def test_verify_zero_rate(capsys):
    code, out = run(capsys, "verify", "--config", UNIFORM, "--set", "r=0")
    assert code == 0
    assert "Gamma = 4.48" in out.out and "arccot bound = 2.0508" in out.out
    assert "result: condition 2" in out.out


def test_verify_neither(capsys):
    code, out = run(capsys, "verify", "--config", UNIFORM, "--set", "r=0", "--set", "T=3")
    assert code == 2
    assert "result: neither" in out.out


def test_bad_override_and_missing_file(capsys, tmp_path):
    with pytest.raises(SystemExit):
        main(["verify", "--config", UNIFORM, "--set", "colour=3"])
    code, out = run(capsys, "verify", "--config", str(tmp_path / "nope.json"))
    assert code == 1 and "error" in out.err


def test_invalid_config_values(capsys, tmp_path):
    doc = json.loads(Path(UNIFORM).read_text())
    doc["sigma"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out = run(capsys, "verify", "--config", str(bad))
    assert code == 1


def test_solve_grid(capsys, tmp_path):
    out = tmp_path / "psi.csv"
    code, _ = run(capsys, "solve", "--config", EXPONENTIAL, "--grid", "40", "--out", str(out))
    assert code == 0
    header, data = read_csv(out.read_text())
    assert header == ["t", "psi_1", "psi_2"]
    assert data.shape == (41, 3)
    np.testing.assert_allclose(data[-1, 1:], 1.0, atol=1e-12)
    assert np.all(data[:, 1:] > 0)


def test_solve_small_rate_matches_zero_rate(capsys):
    _, a = run(capsys, "solve", "--config", UNIFORM, "--grid", "20", "--set", "r=0")
    _, b = run(capsys, "solve", "--config", UNIFORM, "--grid", "20", "--set", "r=1e-6")
    _, da = read_csv(a.out)
    _, db = read_csv(b.out)
    assert np.max(np.abs(da - db) / np.abs(da).clip(1e-300)) <= 1e-3


def test_value_and_strategy(capsys):
    code, out = run(capsys, "strategy", "--config", UNIFORM, "--set", "r=0", "--t", "1", "--s", "1")
    assert code == 0 and float(out.out) == pytest.approx(0.24 / 0.09, abs=1e-12)
    code, out = run(capsys, "value", "--config", UNIFORM, "--t", "2", "--x", "0", "--s", "1")
    assert code == 0 and float(out.out) == pytest.approx(-1.0, abs=1e-12)


def test_sweep_cli(capsys, tmp_path):
    path = tmp_path / "sweep.csv"
    code, _ = run(capsys, "sweep", "--config", UNIFORM, "--kind", "strategy", "--var", "s",
                  "--start", "0.5", "--stop", "3", "--points", "11", "--out", str(path))
    assert code == 0
    header, data = read_csv(path.read_text())
    assert header == ["s", "a_star"] and data.shape == (11, 2)
    assert np.all(np.diff(data[:, 1]) < 0)


def test_sweep_surface_and_errors():
    cfg = load_config(UNIFORM)
    header, rows = sweep_rows(cfg, "strategy", "t", 0, 2, 5, s_points=3)
    assert header == ["t", "s", "a_star"] and len(rows) == 15
    with pytest.raises(ValueError):
        sweep_rows(cfg, "strategy", "x", 0, 2, 5)
    with pytest.raises(ValueError):
        sweep_rows(cfg, "value", "t", 0, 3, 5)
    with pytest.raises(ValueError):
        sweep_rows(cfg, "value", "s", 0, 3, 5)
    with pytest.raises(ValueError):
        sweep_rows(cfg, "density", "t", 0, 1, 5)


def test_value_sweep_over_x_increasing():
    header, rows = sweep_rows(load_config(EXPONENTIAL), "value", "x", 0, 4, 9)
    data = np.array(rows)
    assert header == ["x", "V_1", "V_2"]
    assert np.all(np.diff(data[:, 1]) > 0) and np.all(data[:, 1:] < 0)


def test_simulate_deterministic(capsys, tmp_path):
    argv = ["simulate", "--config", UNIFORM, "--paths", "10", "--dt", "0.01", "--seed", "3"]
    code, a = run(capsys, *argv, "--out", str(tmp_path / "agg.csv"), "--per-path", str(tmp_path / "p.csv"))
    assert code == 0
    _, b = run(capsys, *argv)
    assert a.out == b.out
    assert "analytic_value" in a.out and "z_score" in a.out
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 11
    with pytest.raises(SystemExit):
        main(["simulate", "--config", UNIFORM, "--paths", "10", "--strategy", "greedy"])


def test_scaled_strategy_runs(capsys):
    code, out = run(capsys, "simulate", "--config", UNIFORM, "--paths", "10", "--dt", "0.05",
                    "--strategy", "scaled:0.5")
    assert code == 0 and "0.5*a*" in out.out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "erlangcev", "verify", "--config", UNIFORM],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "condition 1" in proc.stdout
