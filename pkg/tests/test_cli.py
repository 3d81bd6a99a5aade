import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import PARKING, straight_scenario
from tunnelplan.cli import main
from tunnelplan.harness import load_scenario, random_case, save_scenario, scenario_to_dict
from tunnelplan.harness.bench import case_seed
from tunnelplan.harness.output import CSV_HEADER, read_trajectory_csv


def test_plan_parking_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["plan", str(PARKING), "--out", str(out), "--svg"]) == 0
    assert capsys.readouterr().out.startswith("ok: t_f=")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stage1_ok"] and summary["stage2_ok"] and summary["stage3_ok"]
    assert summary["t_f"] == pytest.approx(11.8915, abs=1e-3)
    assert all(c["passed"] for c in summary["verification"].values())
    tunnels = summary["tunnels"]
    assert tunnels["n_rect"] == summary["n_rect"] == len(tunnels["front"]["rects"]) == len(tunnels["rear"]["rects"])
    assert len(tunnels["front"]["points"]) == summary["n_rect"] + 1
    first = tunnels["rear"]["rects"][0]
    assert first["interval"] == [0.0, 1.0 / summary["n_rect"]]
    assert np.array(first["vertices"]).shape == (4, 2) and np.array(first["coeffs"]).shape == (4, 3)
    data = read_trajectory_csv(out / "trajectory.csv")
    assert data.shape == (61, len(CSV_HEADER))
    assert data[-1, 0] == pytest.approx(summary["t_f"])
    assert (out / "scene.svg").read_text().startswith("<svg")


def test_bad_file_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"start": {"x": 0, "y": 0, "theta": 0}}))
    assert main(["plan", str(bad), "--out", str(tmp_path)]) == 1
    assert "goal" in capsys.readouterr().err
    assert not (tmp_path / "summary.json").exists()


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["plan"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--cases", "x"])
    assert exc.value.code == 1


def test_stage_failure_exits_2(tmp_path, capsys):
    path = tmp_path / "blocked.json"
    save_scenario(straight_scenario(obstacles=[(0.95, 0.0)]), path)
    assert main(["plan", str(path), "--out", str(tmp_path)]) == 2
    assert "failed at stage1" in capsys.readouterr().out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["stage1_ok"] is False and summary["stage2_ok"] is None
    assert not (tmp_path / "trajectory.csv").exists()


def test_rand_case_matches_generator(tmp_path):
    path = tmp_path / "case.json"
    assert main(["rand-case", "--seed", "11", "--index", "3", "--out", str(path)]) == 0
    sc = load_scenario(path)
    expected = random_case(case_seed(11, 3))
    assert scenario_to_dict(sc) == scenario_to_dict(expected)
    assert np.array_equal(sc.obstacles.points, expected.obstacles.points)


def test_bench_writes_stats(tmp_path, capsys):
    assert main(["bench", "--cases", "2", "--seed", "5", "--out", str(tmp_path)]) == 0
    assert "Success rate" in capsys.readouterr().out
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["n_cases"] == 2 and len(stats["cases"]) == 2
    assert "Success rate" in (tmp_path / "stats.txt").read_text()


def test_bench_rejects_zero_cases(capsys):
    assert main(["bench", "--cases", "0"]) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "tunnelplan", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "rand-case" in out.stdout
