import io
import json
import subprocess
import sys

import pytest

from bcgain.cli import run
from bcgain.experiments import TABLE1_COLUMNS
from bcgain.output import read_csv


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_regimes_csv():
    code, out, _ = call("regimes", "--alpha", "50,100", "--beta", "20,40", "--m", "1", "--dt", "0.02")
    assert code == 0
    header, rows = read_csv(out)
    assert header == TABLE1_COLUMNS
    assert [r[0] for r in rows] == ["CO", "SO", "CU", "SU"]
    assert rows[0][1:3] == [50.0, 40.0]
    assert rows[3][header.index("x_d_ratio")] == pytest.approx(3.99315, abs=1e-4)


def test_regimes_json_and_files(tmp_path):
    code, out, _ = call("regimes", "--json", "--output-dir", str(tmp_path))
    assert code == 0
    records = json.loads(out)
    assert records[1]["regime"] == "SO" and records[1]["kp"] == 100.0
    assert (tmp_path / "regimes.csv").exists() and (tmp_path / "manifest.json").exists()


def test_regimes_bad_quad():
    code, _, err = call("regimes", "--alpha", "100,50")
    assert code == 1 and "--alpha" in err


def test_bound_with_system():
    code, out, _ = call("bound", "--r", "0.3", "--T", "50", "--n", "1", "--lva", "1", "--eps", "0",
                        "--kp", "50", "--kd", "40", "--m", "1", "--dt", "0.02")
    assert code == 0
    res = json.loads(out)
    assert set(res) == {"gamma", "exponent", "bound_raw", "bound_clipped"}
    assert res["bound_clipped"] == 1.0
    assert res["gamma"] < 0.0125


def test_bound_long_horizon_gamma():
    code, out, _ = call("bound", "--r", "0.3", "--T", "2000", "--lva", "1",
                        "--kp", "50", "--kd", "40", "--m", "1", "--dt", "0.02")
    assert code == 0
    assert json.loads(out)["gamma"] == pytest.approx(0.0125, rel=0.02)


def test_bound_explicit_gamma():
    code, out, _ = call("bound", "--r", "1", "--T", "10", "--lva", "0.5", "--gamma", "0.1")
    res = json.loads(out)
    assert code == 0 and res["gamma"] == 0.1
    assert res["exponent"] == pytest.approx(-10.0)


def test_bound_needs_system_or_gamma():
    code, _, err = call("bound", "--r", "0.3", "--T", "50", "--lva", "1")
    assert code == 1 and "--kp" in err


def test_discretize_json():
    code, out, _ = call("discretize", "--m", "1", "--dt", "0.02", "--kp", "50", "--kd", "40", "--emit-json")
    assert code == 0
    res = json.loads(out)
    assert len(res["a"]) == 2 and len(res["a"][0]) == 2
    assert res["spectral_radius"] == pytest.approx(0.97450, abs=1e-5)


def test_discretize_unstable_exit_2():
    code, _, err = call("discretize", "--m", "1", "--dt", "0.02", "--kp", "1e-10", "--kd", "1")
    assert code == 2 and "rho=" in err


def test_lyapunov_stationary():
    code, out, _ = call("lyapunov", "--m", "1", "--dt", "0.02", "--kp", "50", "--kd", "40")
    assert code == 0
    assert json.loads(out)["x"][0][0] == pytest.approx(0.012480, abs=5e-7)


def test_missing_config_file(tmp_path):
    code, _, err = call("simulate", "--config", str(tmp_path / "nope.json"))
    assert code == 1 and "not found" in err


def test_malformed_config_reports_position(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "plant": {"m": 1, "dt": 0.02},\n  "gains": {"kp": 50 "kd": 40}\n}\n')
    code, _, err = call("simulate", "--config", str(cfg))
    assert code == 1 and "bad.json:3:" in err


def test_config_field_diagnostic(tmp_path):
    cfg = tmp_path / "neg.json"
    cfg.write_text(json.dumps({"plant": {"m": -1, "dt": 0.02}, "gains": {"kp": 50, "kd": 40}}))
    code, _, err = call("simulate", "--config", str(cfg))
    assert code == 1 and "plant" in err


@pytest.mark.parametrize("argv", [["--bogus"], ["regimes", "--nope"], [], ["frobnicate"],
                                  ["bound", "--r", "x", "--T", "1", "--lva", "1"]])
def test_usage_errors(argv):
    code, _, _ = call(*argv)
    assert code == 64


def test_simulate_outputs(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"plant": {"m": 1, "dt": 0.02}, "gains": {"kp": 50, "kd": 40},
                               "noise": {"kind": "gaussian", "sigma_roll": 1.0}}))
    code, _, _ = call("simulate", "--config", str(cfg), "--rollouts", "500", "--horizon", "20",
                      "--seed", "3", "--radius", "0.3", "--output-dir", str(tmp_path / "o"))
    assert code == 0
    header, rows = read_csv((tmp_path / "o" / "envelopes.csv").read_text())
    assert header == ["t", "p50", "p95", "p99", "r95_theory"]
    assert len(rows) == 21
    stats = json.loads((tmp_path / "o" / "stats.json").read_text())
    assert 0 <= stats["failure_rate"] <= 1 and stats["n_rollouts"] == 500


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BCGAIN_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = call("sweep", "--resolution", "4")
    assert code == 0
    assert (tmp_path / "env" / "sweep.csv").exists()


def test_reproduce_manifest_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert call("reproduce", "table1", "--rollouts", "500", "--output-dir", str(d))[0] == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["config_hash"] == mb["config_hash"] and ma["seed"] == 42
    assert ma["version"]
    assert (a / "table1.csv").read_bytes() == (b / "table1.csv").read_bytes()


def test_reproduce_inheritance(tmp_path):
    assert call("reproduce", "inheritance", "--output-dir", str(tmp_path))[0] == 0
    slopes = json.loads((tmp_path / "inheritance_slopes.json").read_text())
    assert set(slopes) == {"CO", "SO", "CU", "SU"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bcgain", "regimes"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("regime,")
