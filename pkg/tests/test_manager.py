import os

from terrain_synth.abstraction import CATALOGS, GridSpec
from terrain_synth.manager import (SWEEP, StrategyLibrary, all_kinds, map_kinds, pair_name, request_cells,
                                   sweep_terrain_states, synthesize_pair, window_state)
from terrain_synth.spec import build_spec, reduce_spec
from terrain_synth.synthesis import build_game, verify_strategy


def test_request_cells_face_forward():
    assert request_cells((3, 3)) == [(0, 2), (1, 2), (2, 2), (0, 0), (2, 0)]
    assert len(request_cells((5, 5))) == 7


def test_off_map_cells_are_obstacles():
    codes = {(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 0}
    assert window_state(codes, (0, 0), (3, 3), 4) == (4, 4, 4, 4, 0, 1, 4, 2, 0)


def test_total_possible_skills():
    assert len(all_kinds(CATALOGS["unstructured-4"])) == 64
    assert len(all_kinds(CATALOGS["unstructured-4"], "8")) == 128


def test_sweep_states_and_exclusion():
    cat = CATALOGS["unstructured-4"]
    g = GridSpec((0, 0), 3, 1, 0.8)
    codes = {(0, 0): cat.code("flat"), (1, 0): cat.code("gap"), (2, 0): cat.code("flat")}
    states, reqs = sweep_terrain_states(codes, g, cat)
    assert len(states) == 3 and reqs == request_cells()
    kept, _ = sweep_terrain_states(codes, g, cat, exclude=("gap",))
    assert kept == []
    kinds = map_kinds(codes, g, cat)
    assert ((1, 0), "flat", "gap") in kinds and ((-1, 0), "gap", "flat") in kinds and len(kinds) == 4


def test_flat_world_offline(flat_world):
    sc, lib, report, checks = flat_world
    assert report.skills_total_possible == 64
    assert report.pairs_total > 0 and report.pairs_solved == report.pairs_total
    assert all(e.origin == SWEEP for e in lib.kinds.values())
    assert {k[1] for k in lib.kinds} == {"flat"}
    for (s, r), rec in lib.strategies.items():
        spec = reduce_spec(build_spec(rec["skills"], lib.grid, lib.catalog.n_t,
                                      obstacle_code=lib.catalog.code("obstacle")), s, r)
        assert verify_strategy(build_game(spec), rec["automaton"], spec)


def test_library_round_trip(flat_world, tmp_path):
    _, lib, _, _ = flat_world
    lib.save(tmp_path)
    again = StrategyLibrary.load(tmp_path)
    assert again.kinds == lib.kinds and again.coverage == lib.coverage
    assert set(again.strategies) == set(lib.strategies)
    for k, rec in lib.strategies.items():
        assert again.strategies[k]["automaton"].dumps() == rec["automaton"].dumps()
    again.save(tmp_path / "copy")
    for name in ("catalog.json", "ledger.json"):
        assert (tmp_path / name).read_bytes() == (tmp_path / "copy" / name).read_bytes()
    s, r = next(iter(sorted(lib.strategies)))
    assert os.path.exists(tmp_path / "strategies" / (pair_name(s, r) + ".json"))


def test_synthesize_pair_reuses_certified_kinds(flat_world):
    _, lib, _, _ = flat_world
    state = (0,) * 9
    status, auto, red = synthesize_pair(lib, state, (0, 2), lib.grid, oracle=None)
    assert auto is not None
    assert all(o.gait_id in lib.gaits for o in red.skills)
