import json
import os

import pytest

from terrain_synth.cli import EXIT_CONFIG, EXIT_OK, main
from terrain_synth.runtime import from_layout


@pytest.fixture(scope="module")
def flat_scenario(tmp_path_factory):
    d = tmp_path_factory.mktemp("scen")
    sc = from_layout(["flat"] * 9, 3, 3, start=(1, 0), goal_cell=(1, 2))
    path = d / "flat.json"
    sc.save(path)
    return str(path)


def test_missing_scenario_is_a_config_error(tmp_path, capsys):
    rc = main(["offline", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_grid_and_exclusion(tmp_path, flat_scenario):
    assert main(["offline", "--scenario", flat_scenario, "--out", str(tmp_path), "--grid", "4x4"]) == EXIT_CONFIG
    assert main(["offline", "--scenario", flat_scenario, "--out", str(tmp_path), "--exclude", "lava"]) == EXIT_CONFIG


def test_recipe_scenario_and_unknown_kind(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"kind": "marsh", "seed": 1}))
    assert main(["offline", "--scenario", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_online_without_library(tmp_path, flat_scenario):
    rc = main(["online", "--scenario", flat_scenario, "--library", str(tmp_path / "none"), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_bad_fail_flag(tmp_path, flat_scenario):
    rc = main(["online", "--scenario", flat_scenario, "--library", str(tmp_path), "--out", str(tmp_path),
               "--fail", "1-1"])
    assert rc == EXIT_CONFIG


def test_offline_then_online(tmp_path, flat_scenario, capsys):
    out = tmp_path / "run"
    assert main(["offline", "--scenario", flat_scenario, "--out", str(out), "--deterministic"]) == EXIT_OK
    for name in ("report.json", "sweep.json", "repair_log.jsonl", "library/catalog.json", "library/report.json"):
        assert (out / name).exists(), name
    rep = json.loads((out / "report.json").read_text())
    assert rep["skills_total_possible"] == 64 and rep["repair_seconds"] is None
    capsys.readouterr()
    on = tmp_path / "on"
    rc = main(["online", "--scenario", flat_scenario, "--library", str(out / "library"), "--out", str(on),
               "--deterministic"])
    assert rc == EXIT_OK
    status = json.loads(capsys.readouterr().out)
    assert status["status"] == "goal_reached" and status["runtime_repair"] == 0
    assert (on / "trace.jsonl").exists() and os.listdir(on / "frames")


def test_check_skill_stand(tmp_path, capsys):
    rc = main(["check-skill", "--skill", "STAY:flat", "--gait", "stand", "--out", str(tmp_path), "--deterministic"])
    assert rc == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "FEASIBLE" and out["check"] == "PASS"
    assert out["force_sum_z"] == pytest.approx(147.84651, abs=1e-3)
    assert "seconds" not in out
    assert (tmp_path / "trajectory.json").exists()


def test_check_skill_parse_errors(tmp_path):
    assert main(["check-skill", "--skill", "UP:flat", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["check-skill", "--skill", "N:flat:flat", "--gait", "moonwalk", "--out", str(tmp_path)]) == EXIT_CONFIG
