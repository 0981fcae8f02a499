"""Small hand-built worlds shared by several test modules."""
from terrain_synth.abstraction import CATALOGS, GridSpec
from terrain_synth.spec import build_spec, make_move_skill, reduce_spec

STONES = ["sparse_stone", "dense_stone", "sparse_stone"]  # one row, left to right


def stone_field():
    """3x3 window: dense stones down the middle column, sparse stones either side."""
    cat = CATALOGS["unstructured-4"]
    grid = GridSpec((0.0, 0.0), 3, 3, 0.8)
    state = tuple(cat.code(STONES[c[0]]) for c in grid.cells())
    return cat, grid, state


def stone_field_skills(cat, grid, state, drop_into=None):
    """Moves along the middle column plus every move between the middle column and a side cell.

    Skills entering ``drop_into`` are left out.
    """
    code = dict(zip(grid.cells(), state))
    out = []
    for c in grid.cells():
        for d in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            t = (c[0] + d[0], c[1] + d[1])
            if not grid.contains(t) or t == drop_into:
                continue
            if c[0] != 1 and t[0] != 1:
                continue
            out.append(make_move_skill(grid, cat, c, d, code[c], code[t], "trot_1.5s"))
    return out


def stone_field_spec(request=(0, 0), drop_into=(0, 0)):
    cat, grid, state = stone_field()
    skills = stone_field_skills(cat, grid, state, drop_into)
    spec = build_spec(skills, grid, cat.n_t, obstacle_code=cat.code("obstacle"))
    return cat, grid, state, reduce_spec(spec, state, request)
