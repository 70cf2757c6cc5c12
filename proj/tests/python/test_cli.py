import csv
import json
import os
import statistics
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("LRVAR_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="LRVAR_CLI not set")


def run(*args, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check:
        assert proc.returncode == 0, proc.stderr
    return proc


GRID = {
    "m_dim": 5, "ranks": [1, 5], "lengths": [120], "lambdas": [1],
    "replications": 3, "seed_base": 3, "burn_in": 50, "record_timing": False,
    "estimators": [
        {"kind": "full-rank", "label": "full"},
        {"kind": "oracle"},
        {"kind": "rank-penalized", "label": "pen",
         "penalty": {"mode": "slope-heuristic", "grid_points": 40}},
    ],
}


def test_simulate_and_report(tmp_path: Path):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps(GRID))
    run("simulate", cfg, "-o", tmp_path / "a", "-q")
    run("simulate", cfg, "-o", tmp_path / "b", "-q", "-j", "2")
    for name in ["replications.csv", "cells.csv", "table.csv", "summary.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    with open(tmp_path / "a" / "replications.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 3 * 3
    groups = {}
    for r in rows:
        groups.setdefault((r["r0"], r["estimator"]), []).append(float(r["excess_risk"]))

    run("report", tmp_path / "a" / "replications.csv", "-o", tmp_path / "c")
    with open(tmp_path / "c" / "cells.csv") as f:
        cells = list(csv.DictReader(f))
    assert len(cells) == len(groups)
    for c in cells:
        values = groups[(c["r0"], c["estimator"])]
        assert float(c["mean"]) == pytest.approx(statistics.fmean(values), rel=1e-12)
        assert float(c["sd"]) == pytest.approx(statistics.stdev(values), rel=1e-9)


def test_generate_fit_and_rank_path(tmp_path: Path):
    traj = tmp_path / "x.csv"
    run("generate", "--dim", 6, "--rank", 2, "-n", 400, "--seed", 1, "-o", traj)
    report = tmp_path / "fit.json"
    run("fit", traj, "--spec", '{"kind":"fixed-rank","rank":2}', "-o", report)
    doc = json.loads(report.read_text())
    assert doc["selected_rank"] <= 2
    assert doc["dimension"] == 6
    path = run("rank-path", traj).stdout.splitlines()
    assert path[0] == "c,rank,objective"
    ranks = [int(line.split(",")[1]) for line in path[1:]]
    assert ranks == sorted(ranks, reverse=True)


def test_exit_codes(tmp_path: Path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**GRID, "typo_key": 1}))
    proc = run("simulate", bad, "-o", tmp_path / "o", check=False)
    assert proc.returncode == 2
    assert "typo_key" in proc.stderr

    data = tmp_path / "d.csv"
    data.write_text("a,b\n1,2\n3,oops\n")
    proc = run("fit", data, check=False)
    assert proc.returncode == 3
    assert "line 3" in proc.stderr

    assert run("fit", tmp_path / "missing.csv", check=False).returncode == 3
    assert run("nonsense", check=False).returncode == 2


def test_forecast_example(tmp_path: Path):
    repo = Path(__file__).resolve().parents[2]
    cfg = repo / "configs" / "forecast_example.json"
    run("forecast", cfg, "-o", tmp_path)
    with open(tmp_path / "forecast_mse.csv") as f:
        scores = list(csv.DictReader(f))
    models = {s["model"] for s in scores}
    assert {"constant-trend", "independent-ar1"} <= models
    assert (tmp_path / "predictions.csv").exists()
