import pytest
from hypothesis import given
from hypothesis import strategies as st

from terrain_synth.abstraction import UNSTRUCTURED_4, GridSpec, TerrainCatalog
from terrain_synth.errors import CodeRangeError, OverlapError
from terrain_synth.formula import (FALSE, TRUE, And, Atom, Iff, Implies, Not, Or, evaluate, fold, parse_prefix,
                                   substitute, to_prefix)
from terrain_synth.manager import KindEntry, StrategyLibrary
from terrain_synth.spec import (GR1Spec, add_skills, build_spec, enumerate_candidate_skills, int_to_bool,
                                make_move_skill, n_bits, pair_valuation, partial_evaluate, reduce_spec)
from terrain_synth.synthesis import build_game, solve_game

NAMES = ["a", "b", "c", "d"]


def formulas(depth=3):
    leaf = st.builds(Atom, st.sampled_from(NAMES), st.booleans()) | st.sampled_from([TRUE, FALSE])

    def extend(children):
        return (st.builds(Not, children)
                | st.builds(lambda xs: And(xs), st.lists(children, min_size=2, max_size=3))
                | st.builds(lambda xs: Or(xs), st.lists(children, min_size=2, max_size=3))
                | st.builds(Implies, children, children)
                | st.builds(Iff, children, children))
    return st.recursive(leaf, extend, max_leaves=8)


valuations = st.tuples(st.frozensets(st.sampled_from(NAMES)), st.frozensets(st.sampled_from(NAMES)))


@given(formulas(), valuations)
def test_fold_preserves_meaning(f, val):
    cur_, nxt_ = val
    assert evaluate(fold(f), cur_, nxt_) == evaluate(f, cur_, nxt_)


@given(formulas(), valuations, st.frozensets(st.sampled_from(NAMES)))
def test_substitution_agrees_with_evaluation(f, val, fixed):
    """Substituting known atoms then evaluating equals evaluating the full valuation."""
    cur_, nxt_ = val
    # substituted names take the same value in both layers
    t = frozenset(n for n in fixed if n in cur_)
    fl = fixed - t
    nxt_ = (nxt_ - fixed) | t
    g = substitute(f, t, fl)
    assert evaluate(g, cur_, nxt_) == evaluate(f, cur_, nxt_)
    assert not (g.names() & fixed)


@given(formulas())
def test_prefix_round_trip(f):
    assert parse_prefix(to_prefix(f)) == f


def test_int_to_bool_little_endian():
    assert int_to_bool((0, 3, 4), 5) == ((0, 0, 0), (1, 1, 0), (0, 0, 1))
    assert n_bits(4) == 2 and n_bits(5) == 3 and n_bits(1) == 0
    with pytest.raises(CodeRangeError):
        int_to_bool((5,), 5)


def test_partial_evaluate_overlap_rejected():
    g = GridSpec((0, 0), 2, 2, 0.8)
    spec = build_spec([], g, 4)
    with pytest.raises(OverlapError):
        partial_evaluate(spec, {"xr0"}, {"xr0"})


def _flat_stone_catalog():
    return TerrainCatalog(("flat", "dense_stone", "sparse_stone", "obstacle"))


def test_reduce_removes_terrain_and_request_atoms():
    cat = _flat_stone_catalog()
    g = GridSpec((0, 0), 3, 3, 0.8)
    skills = enumerate_candidate_skills(g, "4", cat)
    spec = build_spec(skills, g, cat.n_t, obstacle_code=cat.code("obstacle"))
    state = (0, 1, 2, 0, 0, 3, 1, 1, 0)
    red = reduce_spec(spec, state, (2, 2))
    assert red.is_reduced
    # skills whose fragment disagrees with the map disappear
    for o in red.skills:
        for c, code in o.pre[0].terrain:
            assert state[g.index(c)] == code


def test_spec_round_trip():
    cat = UNSTRUCTURED_4
    g = GridSpec((0, 0), 2, 2, 0.8)
    sk = [make_move_skill(g, cat, (0, 0), (1, 0), 0, 0, "trot_1.5s")]
    spec = build_spec(sk, g, cat.n_t, obstacle_code=cat.code("obstacle"))
    again = GR1Spec.from_dict(spec.to_dict())
    assert again.dumps() == spec.dumps()


def test_add_skills_matches_direct_build():
    """Adding skills to a reduced spec gives the same game as reducing the enlarged spec."""
    cat = _flat_stone_catalog()
    g = GridSpec((0, 0), 3, 3, 0.8)
    state = (0,) * 9
    base = [make_move_skill(g, cat, (1, 1), (0, 1), 0, 0, "g")]
    extra = [make_move_skill(g, cat, (1, 2), (1, 0), 0, 0, "g")]
    a = add_skills(reduce_spec(build_spec(base, g, cat.n_t, obstacle_code=3), state, (2, 2)), extra)
    b = reduce_spec(build_spec(base + extra, g, cat.n_t, obstacle_code=3), state, (2, 2))
    sa, sb = solve_game(build_game(a)), solve_game(build_game(b))
    assert a.outputs == b.outputs
    assert (sa.winning == sb.winning).all() and sa.realizable == sb.realizable


def _library(cat, kinds):
    lib = StrategyLibrary(GridSpec((0, 0), 3, 3, 0.8), cat)
    for k in kinds:
        lib.kinds[k] = KindEntry(k, "g", "sweep")
    return lib


@pytest.mark.parametrize("state", [(0,) * 9, (0, 1, 2, 0, 3, 1, 2, 2, 0), (1, 1, 1, 2, 0, 2, 3, 3, 0)])
def test_prefilter_equivalent_to_fold_and_filter(state):
    """Instantiating only the skills consistent with a terrain state gives the same
    reduced spec as encoding every candidate and letting partial evaluation drop the rest."""
    cat = _flat_stone_catalog()
    g = GridSpec((0, 0), 3, 3, 0.8)
    walk = cat.walkable
    kinds = [(d, a, b) for d in ((1, 0), (0, 1), (0, -1), (-1, 0)) for a in walk for b in walk
             if not (a == "sparse_stone" and b == "dense_stone")]
    lib = _library(cat, kinds)
    allowed = {(tuple(k[0]), k[1], k[2]) for k in kinds}
    full = [o for o in enumerate_candidate_skills(g, "4", cat) if o.kind in allowed]
    obst = cat.code("obstacle")
    for req in [(0, 2), (2, 2), (1, 0)]:
        if state[g.index(req)] == obst:
            continue
        red_full = reduce_spec(build_spec(full, g, cat.n_t, obstacle_code=obst), state, req)
        red_pre = reduce_spec(build_spec(lib.skills_for(state, g), g, cat.n_t, obstacle_code=obst), state, req)
        assert red_full.outputs == red_pre.outputs
        a, b = solve_game(build_game(red_full)), solve_game(build_game(red_pre))
        assert (a.winning == b.winning).all() and a.realizable == b.realizable


@given(st.lists(st.integers(0, 3), min_size=9, max_size=9), st.sampled_from([(0, 2), (1, 2), (2, 2)]))
def test_pair_valuation_covers_all_inputs(state, req):
    g = GridSpec((0, 0), 3, 3, 0.8)
    t, f = pair_valuation(g, 4, state, req)
    assert not (t & f)
    assert len(t | f) == 9 * 2 + 3 + 3


def test_candidate_template_counts():
    two = TerrainCatalog(("flat", "dense_stone"))
    assert len(enumerate_candidate_skills(GridSpec((0, 0), 3, 3, 0.8), "4", two)) == 96
    assert enumerate_candidate_skills(GridSpec((0, 0), 1, 1, 0.8), "4", two) == []
    # 8-neighbour model on 3x3: 24 straight plus 16 diagonal cell moves
    assert len(enumerate_candidate_skills(GridSpec((0, 0), 3, 3, 0.8), "8", two)) == 40 * 4
