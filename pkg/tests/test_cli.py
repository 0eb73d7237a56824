from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from vdofrac.cli import main

ZERO = {"theta": "0.5", "omega": "1", "k": "1", "q": "0", "f": "0", "u0": "0",
        "bc": {"type": "dirichlet", "mu1": "0", "mu2": "0"}}


def _config(tmp_path, obj, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_table1(tmp_path):
    path = _config(tmp_path, {"problem": "test1", "grid": {"N": 10, "tau": 0.01}, "eval_time": 0.99})
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "out"), "--ledger"]) == 0
    rows = _rows(tmp_path / "out" / "solution.csv")
    assert list(rows[0]) == ["x", "t", "y", "exact", "error"]
    assert float(rows[3]["error"]) == pytest.approx(0.0006378, rel=1e-3)
    assert float(rows[0]["error"]) == 0.0 and float(rows[-1]["error"]) == 0.0

    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["grid"]["steps"] == 99
    assert summary["ledger"]["violations"] == 0
    assert summary["theta_max_sample"] == pytest.approx(0.856, abs=1e-3)
    assert summary["max_error"] == pytest.approx(0.0008806, rel=1e-3)
    assert set(summary["timings"]) >= {"kernel", "total"}
    assert (tmp_path / "out" / "ledger.csv").read_text().startswith("level,t,lhs,rhs,slack\n")


def test_solve_zero_problem_infers_c1(tmp_path):
    path = _config(tmp_path, {"problem": ZERO, "grid": {"N": 4, "steps": 3}, "eval_time": 0.6})
    assert main(["solve", "--config", str(path), "--out", str(tmp_path), "--ledger"]) == 0
    text = (tmp_path / "solution.csv").read_text()
    assert text.splitlines()[0] == "x,t,y"
    assert all(float(r["y"]) == 0.0 for r in _rows(tmp_path / "solution.csv"))
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["validation"]["inferred_c1"] == pytest.approx(1.0)


def test_solve_non_grid_time_exits_2(tmp_path, capsys):
    path = _config(tmp_path, {"problem": "test1", "grid": {"N": 10, "tau": 0.01}, "eval_time": 0.995})
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "eval_time" in capsys.readouterr().err


def test_solve_validation_failure_exits_2(tmp_path, capsys):
    bad = dict(ZERO, q="-1")
    path = _config(tmp_path, {"problem": bad, "grid": {"N": 4, "steps": 2}, "eval_time": 0.5})
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "q negative" in capsys.readouterr().err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not summary["validation"]["ok"]


def test_solve_config_error_exits_2(tmp_path, capsys):
    path = _config(tmp_path, {"problem": dict(ZERO, k="1+*2"), "grid": {"N": 4, "steps": 2}})
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "problem.k" in capsys.readouterr().err
    assert main(["solve", "--out", str(tmp_path)]) == 2


def test_solve_numerical_failure_exits_3(tmp_path, monkeypatch, capsys):
    import vdofrac.cli

    def failing_march(*args, **kwargs):
        raise vdofrac.cli.SchemeError("zero pivot in row 2", level=4)

    monkeypatch.setattr(vdofrac.cli, "march", failing_march)
    assert main(["solve", "--table", "1", "--out", str(tmp_path)]) == 3
    assert "level 4" in capsys.readouterr().err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert "zero pivot" in summary["error"]


def test_solve_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["solve", "--table", "4", "--out", str(tmp_path / name), "--ledger"]) == 0
    for fname in ("solution.csv", "ledger.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()
    rows = _rows(tmp_path / "a" / "solution.csv")
    assert float(rows[-1]["error"]) == pytest.approx(0.0089144, rel=1e-4)


def test_converge_table6(tmp_path):
    assert main(["converge", "--table", "6", "--out", str(tmp_path), "--parallel", "2"]) == 0
    rows = _rows(tmp_path / "convergence.csv")
    errors = [float(r["max_error"]) for r in rows]
    for got, want in zip(errors, [0.0089152, 0.0022597, 0.0005727]):
        assert got == pytest.approx(want, rel=0.1)
    assert rows[0]["order"] == ""
    assert float(rows[1]["order"]) == pytest.approx(1.980, abs=0.05)


def test_converge_from_config(tmp_path):
    path = _config(tmp_path, {"problem": "test2", "grid": {"N": 4, "steps": 1}, "eval_time": 0.5,
                              "plan": {"axis": "time", "N": 8, "steps": [2, 4, 8]}})
    assert main(["converge", "--config", str(path), "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "convergence.csv")) == 3
    path = _config(tmp_path, {"problem": "test2", "grid": {"N": 4, "steps": 1}}, "noplan.json")
    assert main(["converge", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_verify_suite_subset(tmp_path, capsys):
    path = _config(tmp_path, {"problem": "test2"})
    code = main(["verify", "--suite", "ledger", "--suite", "thomas", "--config", str(path),
                 "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] and set(report["suites"]) == {"ledger", "thomas"}
    runs = report["suites"]["ledger"]["runs"]
    assert runs and all(k.startswith("test2/") for k in runs)
    assert all(r["min_rel_slack"] >= 0.0 for r in runs.values())


def test_verify_fault_injection(tmp_path):
    code = main(["verify", "--suite", "lemma2", "--suite", "residual", "--inject-fault",
                 "--out", str(tmp_path)])
    assert code == 1
    report = json.loads((tmp_path / "verify.json").read_text())
    assert not report["suites"]["lemma2"]["passed"]
    assert not report["suites"]["residual"]["passed"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vdofrac.cli", "solve", "--table", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "solution.csv").exists()
