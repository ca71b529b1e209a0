import csv
import json
import math
from pathlib import Path

import pytest

from efficient_ppe.cli import main

DATA = Path(__file__).parent / "data"
CONFIGS = Path(__file__).parent.parent / "configs"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def same_cell(a, b):
    try:
        x, y = float(a), float(b)
    except ValueError:
        return a == b
    if math.isinf(x) or math.isinf(y):
        return x == y
    return abs(x - y) <= 1e-12


def test_pd_analysis_matches_golden(tmp_path):
    assert main(["analyze", "--config", str(DATA / "pd.ini"), "--out", str(tmp_path)]) == 0
    got = read_rows(tmp_path / "analysis.csv")
    want = read_rows(DATA / "pd_analysis.csv")
    assert got[0] == want[0]
    assert len(got) == len(want)
    for g, w in zip(got, want):
        for a, b in zip(g, w):
            for x, y in zip(a.split(";"), b.split(";")):
                assert same_cell(x, y), (g, w)


def test_analysis_round_trip(tmp_path):
    main(["analyze", "--config", str(DATA / "pd.ini"), "--out", str(tmp_path)])
    rows = read_rows(tmp_path / "analysis.csv")
    mu = [r[9] for r in rows if r[0] == "player"]
    summary = {r[13]: r[14] for r in rows if r[0] == "summary"}
    cfg = tmp_path / "again.ini"
    cfg.write_text(f"[game]\nbuilder = modified_pd\n[analysis]\nmu = {', '.join(mu)}\n"
                   f"delta = {summary['delta']}\n")
    out = tmp_path / "again"
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    again = {r[13]: r[14] for r in read_rows(out / "analysis.csv") if r[0] == "summary"}
    for k in ("cond1_margin", "cond2_margin", "cond3_margin", "cond4_margin"):
        assert again[k] == summary[k]


def test_table3_is_infeasible(tmp_path, capsys):
    assert main(["analyze", "--config", str(CONFIGS / "table3.ini"), "--out", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "Condition 3 infeasible" in out
    assert "0.7000, 0.7000, 0.7000" in out


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[game]\nbuilder = modified_pd\nB = 1\n")
    assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    cfg.write_text("[game]\nbuilder = modified_pd\nZ = 1\n")
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["explode", "--config", str(cfg)]) == 2


def test_validate_reports_witness(tmp_path, capsys):
    cfg = tmp_path / "qr.ini"
    cfg.write_text("[game]\nbuilder = modified_pd\nq = 0.5\nr = 0.5\n")
    assert main(["validate", "--config", str(cfg)]) == 1
    assert "A4: FAIL" in capsys.readouterr().out


def test_run_writes_trajectory(tmp_path):
    assert main(["run", "--config", str(CONFIGS / "pd.ini"), "--out", str(tmp_path),
                 "--horizon", "30", "--seed", "4"]) == 0
    rows = read_rows(tmp_path / "trajectory.csv")
    assert rows[0] == ["t", "active", "signal", "v_1", "v_2", "d_1", "d_2"]
    assert len(rows) == 31


def test_simulate_summary(tmp_path):
    assert main(["simulate", "--config", str(CONFIGS / "pd.ini"), "--out", str(tmp_path),
                 "--episodes", "500"]) == 0
    summary = json.loads((tmp_path / "simulation_summary.json").read_text())
    assert summary["episodes"] == 500
    assert all(summary["verdicts"].values())
    assert len(read_rows(tmp_path / "simulation.csv")) == 501


def test_oracle_and_sweep(tmp_path):
    assert main(["oracle", "--config", str(CONFIGS / "pd.ini"), "--out", str(tmp_path)]) == 0
    assert len(read_rows(tmp_path / "oracle.csv")) == 102
    assert main(["sweep", "--config", str(CONFIGS / "pd.ini"), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "sweep.csv")[1:]
    for r in rows:
        assert (r[4] == "true") == (float(r[0]) >= 7 / 9)


def test_conditions_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "low.ini"
    cfg.write_text("[game]\nbuilder = modified_pd\n[analysis]\ndelta = 0.7\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "ConditionsNotMet" in capsys.readouterr().err
