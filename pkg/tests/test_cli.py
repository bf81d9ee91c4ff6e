import json
import subprocess
import sys

import pytest

from manifold_brownian.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 7
    assert any(r.startswith("so3") for r in rows) and any(r.startswith("aff-r") for r in rows)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "manifold_brownian", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "hyperbolic-n" in res.stdout


def test_usage_errors(capsys):
    assert run(["verify", "nonsense"], capsys)[0] == 1
    assert run(["simulate", "--manifold", "klein"], capsys)[0] == 1
    assert run(["simulate", "--seed", "0xZZ"], capsys)[0] == 1
    assert run([], capsys)[0] == 1


def test_validation_errors(capsys, tmp_path):
    out = str(tmp_path / "a.csv")
    code, _, err = run(["simulate", "--manifold", "so3", "--param", "n=3", "--out", out], capsys)
    assert code == 2 and "valid" in err
    code, _, err = run(["simulate", "--manifold", "sphere-n", "--observable", "nope", "--out", out], capsys)
    assert code == 2 and "x_dot_x0" in err
    code, _, _ = run(["simulate", "--dt", "0.3", "--t-final", "1", "--out", out], capsys)
    assert code == 2
    code, _, _ = run(["geometry", "--manifold", "sphere2-chart", "--point", "0,0"], capsys)
    assert code == 2


def test_simulate_csv_schema(capsys, tmp_path):
    out = tmp_path / "so3.csv"
    code, _, _ = run(["simulate", "--manifold", "so3", "--paths", "2", "--dt", "0.01", "--t-final", "0.02",
                      "--seed", "0x10", "--out", str(out), "--workers", "1"], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "path_id,step,time," + ",".join(f"state_{i}" for i in range(9)) + ",residual"
    assert len(lines) == 1 + 6
    summary = json.loads((tmp_path / "so3.summary.json").read_text())
    assert list(summary)[0] == "schema_version"
    assert summary["config"]["seed"] == 16 and summary["config"]["scheme"] == "group-exp"


def test_simulate_byte_identical_across_workers(capsys, tmp_path):
    base = ["simulate", "--manifold", "hyperbolic-n", "--paths", "40", "--dt", "0.01", "--t-final", "0.5",
            "--formulation", "ito", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(base + ["--workers", "1", "--out", str(a)], capsys)[0] == 0
    assert run(base + ["--workers", "8", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"manifold": "sphere-n", "param": {"n": 3}, "paths": 3, "dt": 0.1,
                               "t_final": 0.2, "seed": "0x2a"}))
    out = tmp_path / "r.csv"
    assert run(["simulate", "--config", str(cfg), "--paths", "2", "--out", str(out)], capsys)[0] == 0
    summary = json.loads((tmp_path / "r.summary.json").read_text())
    assert summary["config"]["paths"] == 2 and summary["config"]["seed"] == 42
    assert summary["config"]["params"] == {"n": 3}
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run(["simulate", "--config", str(cfg), "--out", str(out)], capsys)[0] == 2


def test_geometry_examples(capsys):
    code, out, _ = run(["geometry", "--manifold", "aff-r"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["canonical_drift"][0] == pytest.approx(-2 ** 0.5, abs=1e-12)
    code, out, _ = run(["geometry", "--manifold", "sphere-n", "--n", "2", "--point", "1,0,0"], capsys)
    d = json.loads(out)
    assert d["mean_curvature"] == pytest.approx([-2.0, 0.0, 0.0])
    code, out, _ = run(["geometry", "--manifold", "torus2-group"], capsys)
    d = json.loads(out)
    assert d["canonical_drift"] == [0.0, 0.0]
    code, out, _ = run(["geometry", "--manifold", "sphere2-chart", "--point", "1.0,0.5"], capsys)
    d = json.loads(out)
    assert set(d) >= {"metric", "christoffel", "frame_drift", "strat_drift"}


def test_verify_negative_control_exit_code(capsys, tmp_path):
    rep = tmp_path / "rep.json"
    code, out, _ = run(["verify", "so3-decay", "--paths", "10", "--out", str(rep)], capsys)
    assert code == 3 and out.startswith("FAIL")
    d = json.loads(rep.read_text())
    assert d["schema_version"] == "1" and d["verdict"] == "fail"
    r = d["reports"][0]
    assert {"estimate", "target", "stderr", "tolerance"} <= set(r)


def test_verify_pass_exit_code(capsys):
    code, out, _ = run(["verify", "sphere-decay", "--n", "2", "--paths", "3000", "--dt", "0.01"], capsys)
    assert code == 0 and out.startswith("PASS")
