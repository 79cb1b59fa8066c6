import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hyperlattice.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_solve(tmp_path):
    out, rep, dump = tmp_path / "pi.csv", tmp_path / "r.json", tmp_path / "q.txt"
    assert main(["solve", "--config", str(CONFIGS / "two_server.json"), "--K", "6",
                 "--out", str(out), "--report", str(rep), "--dump-matrix", str(dump)]) == 0
    rows = _rows(out)
    assert rows[0] == ["index", "n_1", "n_2", "probability"]
    assert len(rows) == 1 + 28
    assert json.loads(rep.read_text())["K"] == 6
    assert dump.read_text().split()[0] == "28"


@pytest.mark.parametrize("solver", ["direct", "power"])
def test_solve_flags(tmp_path, solver):
    out = tmp_path / "pi.csv"
    main(["solve", "--config", str(CONFIGS / "two_server.json"), "--K", "4", "--solver", solver,
          "--mode", "reflecting", "--tol", "1e-13", "--out", str(out)])
    total = sum(float(r[-1]) for r in _rows(out)[1:])
    assert total == pytest.approx(1 - 0.5**5, abs=1e-9)


def test_simulate(tmp_path):
    out, log, rep = tmp_path / "s.csv", tmp_path / "log.csv", tmp_path / "s.json"
    main(["simulate", "--config", str(CONFIGS / "two_server.json"), "--events", "2000",
          "--reps", "2", "--seed", "3", "--travel", "--log", str(log), "--out", str(out),
          "--report", str(rep)])
    assert _rows(out)[0] == ["server", "workload", "workload_ci", "rho_ii", "mean_queue"]
    assert _rows(log)[0] == ["time", "event_kind", "region", "server", "queue_len_after"]
    assert json.loads(rep.read_text())["replications"] == 2


@pytest.mark.parametrize("cmd,extra", [
    ("sweep-overlap", ["--grid", "0,0.5"]),
    ("sweep-eta", ["--grid", "0.5", "--r", "0.3"]),
    ("sweep-load", ["--grid", "0.4", "--K", "8"]),
])
def test_sweeps(tmp_path, cmd, extra):
    out = tmp_path / "sw.csv"
    main([cmd, "--events", "1000", "--reps", "2", "--out", str(out), *extra])
    rows = _rows(out)
    assert rows[0][:3] == ["index", "axis", "value"]
    assert "workload_error" in rows[0]


def test_table_states(tmp_path):
    out = tmp_path / "t.csv"
    main(["table-states", "--no-timing", "--out", str(out)])
    rows = {(r[0], r[1]): r[2] for r in _rows(out)[1:]}
    assert rows[("3", "15")] == "816"


def test_evaluate_plan(tmp_path):
    out, rep = tmp_path / "p.csv", tmp_path / "p.json"
    main(["evaluate-plan", "--plan", str(CONFIGS / "plan_synthetic.csv"), "--out", str(out),
          "--report", str(rep), "--check"])
    data = json.loads(rep.read_text())
    assert data["meta"]["states"] == 1820 and "truncation_check" in data
    assert len(_rows(out)) == 13


def test_aggregate_and_states(tmp_path, capsys):
    out = tmp_path / "a.csv"
    main(["aggregate", "--servers", "2", "--lam", "1", "--K", "3", "--out", str(out)])
    assert _rows(out)[0] == ["k", "level_size", "birth_rate", "death_rate", "prob", "sigma"]
    main(["states", "--servers", "3", "--K", "2", "--rank", "0,1,1"])
    assert capsys.readouterr().out.strip() == "5"
    main(["states", "--servers", "3", "--K", "2", "--unrank", "5"])
    assert capsys.readouterr().out.strip() == "0,1,1"
    main(["states", "--servers", "2", "--K", "1"])
    assert capsys.readouterr().out.splitlines()[0] == "index,n_1,n_2,level"


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "hyperlattice.cli", "states", "--servers", "2",
                        "--K", "1"], capture_output=True, text=True, check=True)
    assert len(r.stdout.splitlines()) == 4
