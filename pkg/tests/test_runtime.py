import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from terrain_synth.abstraction import GridSpec, abstract_grid
from terrain_synth.errors import ConfigError, NoCandidateError
from terrain_synth.manager import request_cells
from terrain_synth.runtime import (TerrainScenario, execute, from_layout, generate_scenario, local_waypoint,
                                   perturb_polygons, render_trace, schedule, total_idle)
from terrain_synth.templates import STRIP_WIDTH

# -- scenarios -------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["unstructured-4", "unstructured-8", "rebar-7", "rebar-14"])
def test_scenarios_are_seeded(kind):
    a, b = generate_scenario(kind, 3), generate_scenario(kind, 3)
    assert a.dumps() == b.dumps()
    assert generate_scenario(kind, 4).dumps() != a.dumps()


def test_scenario_round_trip(tmp_path):
    sc = generate_scenario("unstructured-4", 1)
    sc.save(tmp_path / "s.json")
    assert TerrainScenario.load(tmp_path / "s.json").dumps() == sc.dumps()
    with pytest.raises(ConfigError):
        TerrainScenario.from_dict({"grid": {}})
    with pytest.raises(ConfigError):
        generate_scenario("lava", 0)


def test_unstructured_start_is_flat():
    for seed in range(10):
        sc = generate_scenario("unstructured-4", seed)
        i, j = sc.start
        assert sc.layout[j * sc.grid.n_cols + i] == "flat"


@pytest.mark.parametrize("kind,hi", [("rebar-7", 0.35), ("rebar-14", 0.6)])
def test_rebar_mesh_spacing(kind, hi):
    for seed in range(5):
        sc = generate_scenario(kind, seed)
        for key in ("x_strips", "y_strips"):
            gaps = np.diff(sc.params[key])
            assert len(gaps) and gaps.min() >= 0.15 - 1e-12 and gaps.max() <= hi + 1e-12
        widths = [min(np.ptp(p.points[:, 0]), np.ptp(p.points[:, 1])) for p in sc.polygons]
        assert np.allclose(widths, STRIP_WIDTH)


def test_perturbation():
    sc = generate_scenario("unstructured-4", 2)
    assert perturb_polygons(sc, 0, 0.0) is sc
    with pytest.raises(ValueError):
        perturb_polygons(sc, 0, -0.1)
    small = perturb_polygons(sc, 0, 0.01)
    assert len(small.polygons) == len(sc.polygons)
    assert perturb_polygons(sc, 5, 0.01).dumps() == perturb_polygons(sc, 5, 0.01).dumps()


def test_heavy_perturbation_turns_stones_into_gaps():
    sc = from_layout(["dense_stone"] * 9, 3, 3)
    before = abstract_grid(sc.polygons, sc.grid, sc.classifier, sc.catalog)
    after = abstract_grid(perturb_polygons(sc, 0, 0.6).polygons, sc.grid, sc.classifier, sc.catalog)
    assert {t.name for t in before.values()} == {"dense_stone"}
    assert any(t.name == "gap" for t in after.values())


# -- local requests --------------------------------------------------------------------------

def _window():
    return GridSpec((0.0, 0.0), 3, 3, 0.8)


def test_waypoint_inside_window():
    assert local_waypoint((0.4, 2.0), _window(), (0,) * 9, 4) == (0, 2)


def test_waypoint_far_ahead_uses_request_cells():
    g = _window()
    assert local_waypoint((1.2, 50.0), g, (0,) * 9, 4, request_cells()) == (1, 2)
    # the straight-ahead cell is blocked: the nearer top corner wins, ties by index
    state = [0] * 9
    state[g.index((1, 2))] = 4
    assert local_waypoint((1.2, 50.0), g, state, 4, request_cells()) == (0, 2)
    assert local_waypoint((1.3, 50.0), g, state, 4, request_cells()) == (2, 2)


def test_waypoint_without_candidates():
    with pytest.raises(NoCandidateError):
        local_waypoint((1.2, 50.0), _window(), (4,) * 9, 4)


# -- coordination ----------------------------------------------------------------------------

def test_schedule_cases():
    # solves quicker than execution: seamless appends
    tl = schedule([(0.4, 1.5), (0.4, 1.5), (0.4, 1.5)])
    assert [s.action for s in tl[1:]] == ["append", "append"] and total_idle(tl) == 0
    assert tl[1].start == pytest.approx(tl[0].end)
    # slower solve: the robot waits
    tl = schedule([(0.4, 1.0), (1.5, 1.0)])
    assert tl[1].action == "wait" and tl[1].idle == pytest.approx(0.5)
    with pytest.raises(ValueError):
        schedule([(0.0, 1.0)])


segments = st.lists(st.tuples(st.floats(1e-3, 5.0), st.floats(1e-3, 5.0)), min_size=1, max_size=30)


@settings(max_examples=200)
@given(segments)
def test_schedule_idle_matches_closed_form(segs):
    tl = schedule(segs)
    expected = 0.0
    for i in range(1, len(segs)):
        remaining = tl[i - 1].end - tl[i - 1].ready  # trajectory time left when solve i starts
        expected += max(0.0, segs[i][0] - remaining)
    assert total_idle(tl) == pytest.approx(expected, abs=1e-9)
    for a, b in zip(tl, tl[1:]):
        assert b.start >= a.end - 1e-12 and b.start >= b.ready - 1e-12
        if b.action == "append":
            assert b.start == a.end


# -- execution -------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def flat_trace(flat_world):
    sc, lib, _, _ = flat_world
    return execute(lib, sc, deterministic=True)


def test_covered_world_needs_no_repair(flat_world, flat_trace):
    sc, lib, _, _ = flat_world
    tr = flat_trace
    assert tr.status == "goal_reached"
    assert tr.count("runtime_repair") == tr.count("unseen_state") == tr.count("solve_failure") == 0
    assert tr.path[0] == tuple(sc.start) and tr.path[-1] == (2, 4)
    # the caller's library is untouched
    assert tr.library is not lib


def test_trace_output(flat_world, flat_trace, tmp_path):
    sc = flat_world[0]
    lines = flat_trace.dumps().splitlines()
    rows = [json.loads(x) for x in lines]
    assert rows[-1]["tag"] == "summary" and rows[-1]["status"] == "goal_reached"
    assert sum(r["tag"] == "schedule" for r in rows) == flat_trace.count("advance")
    paths = render_trace(sc, flat_trace, tmp_path / "frames")
    assert len(paths) == len(flat_trace.frames) + 1
    assert open(paths[-1]).read().startswith("<svg")


def test_deterministic_execution_repeats(flat_world, flat_trace):
    sc, lib, _, _ = flat_world
    assert execute(lib, sc, deterministic=True).dumps() == flat_trace.dumps()


def test_forced_failure_takes_a_detour(flat_world):
    sc, lib, _, _ = flat_world
    tr = execute(lib, sc, deterministic=True, fail_transitions=[((2, 1), (2, 2))])
    assert tr.status == "goal_reached"
    assert tr.count("solve_failure") >= 1 and tr.count("runtime_repair") == 0
    moves = list(zip(tr.path, tr.path[1:]))
    assert ((2, 1), (2, 2)) not in moves
