import json
import subprocess
import sys

import numpy as np
import pytest

from mgresilience.cli import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_OK, main

from conftest import small_case_doc


@pytest.fixture
def small_path(tmp_path):
    doc = small_case_doc(np.random.default_rng(21), n_mg=2, same_dynamics=True)
    path = tmp_path / "small.json"
    path.write_text(json.dumps(doc))
    return path


def test_validate_bundled(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path), "--cbf"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("ok: 4 microgrids, 5 linking lines")
    assert "variables: 563" in out
    assert (tmp_path / "model.cbf").read_text().startswith("VER\n3")


def test_missing_case(tmp_path, capsys):
    assert main(["validate", "--case", str(tmp_path / "none.json")]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_bad_case(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"bases": 1}')
    assert main(["validate", "--case", str(bad)]) == EXIT_ERROR


def test_simulate_sfr(tmp_path, capsys):
    code = main(["simulate-sfr", "--subset", "m1,m2", "--dp", "1", "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    # two-unit aggregate, unit step
    assert "+0.04352072" in out
    header = (tmp_path / "sfr.csv").read_text().splitlines()[0]
    assert header == "t,d_omega_pu,d_f_hz"


def test_simulate_sfr_unknown_subset(tmp_path, capsys):
    assert main(["simulate-sfr", "--subset", "m1,m9", "--dp", "1", "--out", str(tmp_path)]) == EXIT_ERROR


def test_solve_zero_severity(tmp_path, capsys):
    assert main(["solve", "--severity", "0", "--out", str(tmp_path), "--reproducible"]) == EXIT_OK
    doc = json.loads((tmp_path / "solution.json").read_text())
    assert doc["status"] == "optimal"
    assert doc["solution"]["curtailment_kw"] == 0.0
    assert doc["solution"]["shed_loads"] == []
    assert "-0.0000" not in capsys.readouterr().out


def test_solve_reproducible_bytes(small_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--case", str(small_path), "--out", str(out), "--reproducible"]) == EXIT_OK
    for name in ("solution.json", "trace.csv", "verify.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_time_limit(small_path, tmp_path, capsys):
    code = main(["solve", "--case", str(small_path), "--out", str(tmp_path), "--time-limit", "1e-9"])
    assert code == EXIT_LIMIT
    assert json.loads((tmp_path / "solution.json").read_text())["status"] == "limit"


def test_solve_infeasible(tmp_path, capsys):
    doc = small_case_doc(np.random.default_rng(2), n_mg=1, deficit_kw=5000.0)
    path = tmp_path / "inf.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "--case", str(path), "--out", str(tmp_path)]) == EXIT_INFEASIBLE


def test_compare_baseline_only(tmp_path, capsys):
    assert main(["compare", "--baseline-only", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "compare.csv").exists()
    assert "830.0" in (tmp_path / "compare.txt").read_text()


def test_baseline_ufls_custom_stage(tmp_path, capsys):
    code = main(["baseline-ufls", "--stage", "0.1:0.5", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "ufls_events.csv").exists()
    assert main(["baseline-ufls", "--stage", "bogus", "--out", str(tmp_path)]) == EXIT_ERROR


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mgresilience", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().startswith("mgresilience")
