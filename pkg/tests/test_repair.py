import pytest
from scenarios import stone_field_spec

from terrain_synth.errors import UnrepairableError
from terrain_synth.feasibility import FEASIBLE, INFEASIBLE, GaitFreeOracle, OracleVerdict
from terrain_synth.micp import GO2, MicpConfig
from terrain_synth.repair import (OFFLINE_INFEASIBLE, OFFLINE_TIMEOUT, POST_MODE, PRE_MODE, DisallowedLedger,
                                  LedgerEntry, add_disallowed, candidate_suggestions, repair, terrain_of,
                                  transition_key, winning_cells)
from terrain_synth.synthesis import synthesize


class RejectAll:
    """Oracle stub that refuses every move."""

    def __init__(self, catalog):
        self.catalog = catalog
        self.calls = []

    def query(self, grid, src, dst, a, b):
        self.calls.append((src, dst))
        return OracleVerdict(INFEASIBLE)


def test_terrain_recovered_from_partial_evaluation():
    cat, grid, state, spec = stone_field_spec()
    assert terrain_of(spec) == dict(zip(grid.cells(), state))


def test_full_skill_set_is_realizable():
    cat, grid, state, spec = stone_field_spec(drop_into=None)
    ok, auto, game, _ = synthesize(spec)
    assert ok


def test_missing_entry_skill_is_unrealizable():
    _, _, _, spec = stone_field_spec()
    assert not synthesize(spec)[0]
    # resting on the request is the only win
    assert winning_cells(spec) == {(0, 0)}


def test_suggestions_follow_the_winning_set():
    cat, grid, state, spec = stone_field_spec()
    win = winning_cells(spec)
    terrain = terrain_of(spec)
    led = DisallowedLedger()
    for mode in (PRE_MODE, POST_MODE):
        for s in candidate_suggestions(spec, win, mode, terrain, led):
            a, b = s.pre[0].cell, s.post[0]
            assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
            if mode == PRE_MODE:
                assert b in win and a not in win
            else:
                assert b in win
    # only the request cell wins, so post mode must aim every suggestion at it
    post = candidate_suggestions(spec, win, POST_MODE, terrain, led)
    assert post and all(s.post[0] == (0, 0) for s in post)


def test_repair_adds_a_certified_skill_into_the_request_cell():
    cat, grid, state, spec = stone_field_spec()
    oracle = GaitFreeOracle(cat, GO2, MicpConfig(), 0.8, deterministic=True)
    led = DisallowedLedger()
    res = repair(spec, oracle, led, seed=0)
    assert res.realizable
    assert any(sk.target == (0, 0) for sk in res.new_skills)
    for sk in res.new_skills:
        assert sk.gait_id in res.gaits
    ok, auto, game, _ = synthesize(res.spec)
    assert ok
    # every certified skill was confirmed by an actual solve
    assert all(r["verdict"] == FEASIBLE for r in res.log if "skill" in r)


def test_realizable_spec_needs_no_suggestions():
    cat, grid, state, spec = stone_field_spec(drop_into=None)
    res = repair(spec, RejectAll(cat), DisallowedLedger())
    assert res.realizable and res.n_suggestions == 0 and res.spec is spec


def test_exhausted_candidates_are_unrepairable():
    cat, grid, state, spec = stone_field_spec()
    stub = RejectAll(cat)
    led = DisallowedLedger()
    res = repair(spec, stub, led, seed=3)
    assert not res.realizable and res.status == "unrepairable"
    # each rejected transition is asked once and then remembered
    assert len(stub.calls) == len(set(stub.calls)) == len(led)
    assert all(e.tag == OFFLINE_INFEASIBLE for e in led.entries)
    with pytest.raises(UnrepairableError):
        repair(spec, RejectAll(cat), DisallowedLedger(), raise_on_failure=True)


def test_ledger_entries_never_resuggested():
    cat, grid, state, spec = stone_field_spec()
    win = winning_cells(spec)
    terrain = terrain_of(spec)
    led = DisallowedLedger()
    first = candidate_suggestions(spec, win, POST_MODE, terrain, led)
    led.add(LedgerEntry(first[0].pre[0].cell, first[0].pre[0].terrain, first[0].post[0], OFFLINE_INFEASIBLE))
    again = candidate_suggestions(spec, win, POST_MODE, terrain, led)
    assert first[0].key not in {s.key for s in again}
    assert len(again) == len(first) - 1


def test_hard_failure_replaces_timeout():
    led = DisallowedLedger()
    frag = (((0, 0), 1), ((1, 0), 2))
    assert led.add(LedgerEntry((0, 0), frag, (1, 0), OFFLINE_TIMEOUT))
    assert not led.add(LedgerEntry((0, 0), frag, (1, 0), OFFLINE_INFEASIBLE))
    assert [e.tag for e in led.entries] == [OFFLINE_INFEASIBLE]
    assert transition_key((0, 0), frag, (1, 0)) in led
    assert DisallowedLedger.from_dict(led.to_dict()).to_dict() == led.to_dict()


def test_add_disallowed_is_idempotent_and_blocks_the_move():
    cat, grid, state, spec = stone_field_spec(request=(1, 2), drop_into=None)
    sid = "N_dense_stone_dense_stone@1_1"
    assert sid in spec.outputs
    led = DisallowedLedger()
    once = add_disallowed(spec, ((1, 1), sid), led)
    twice = add_disallowed(once, ((1, 1), sid), led)
    assert len(once.sys_safety_hard) == len(spec.sys_safety_hard) + 1
    assert twice.sys_safety_hard == once.sys_safety_hard and len(led) == 1
    ok, auto, _, _ = synthesize(spec)
    assert ok and sid in auto.path_from((1, 1))
    # the side columns have no vertical moves, so the forbidden step was the only way up
    assert not synthesize(once)[0]
