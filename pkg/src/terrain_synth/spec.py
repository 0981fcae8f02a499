"""GR(1) specifications built from skills, and their partial evaluation."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .abstraction import GridSpec, TerrainCatalog
from .errors import CodeRangeError, OverlapError
from .formula import (TRUE, And, Atom, Formula, Iff, Implies, Not, Or, conj, cur, disj, fold, lit, nxt,
                      parse_prefix, substitute, to_prefix)

DIRECTIONS_4 = (("E", (1, 0)), ("N", (0, 1)), ("S", (0, -1)), ("W", (-1, 0)))
_COMPASS = {(1, 0): "E", (0, 1): "N", (0, -1): "S", (-1, 0): "W",
            (1, 1): "NE", (-1, 1): "NW", (1, -1): "SE", (-1, -1): "SW"}


def direction_name(d) -> str:
    return _COMPASS.get(tuple(d), f"d{d[0]}_{d[1]}".replace("-", "m"))


def movement_directions(movement="4"):
    """Offsets for the 4- or 8-neighbour model ("4" / "8") or a Chebyshev radius given as an int."""
    if movement in ("4", None):
        return [d for _, d in DIRECTIONS_4]
    r = 1 if movement == "8" else int(movement)
    return sorted((di, dj) for di in range(-r, r + 1) for dj in range(-r, r + 1) if (di, dj) != (0, 0))


# -- propositions ---------------------------------------------------------------

@dataclass(frozen=True)
class Proposition:
    id: str
    kind: str  # robot_x, robot_y, req_x, req_y, terrain_bit, skill_output
    cell: tuple | None = None
    bit: int | None = None


def n_bits(n_t: int) -> int:
    return math.ceil(math.log2(n_t)) if n_t > 1 else 0


def robot_x(i):
    return f"x{i}"


def robot_y(j):
    return f"y{j}"


def req_x(i):
    return f"xr{i}"


def req_y(j):
    return f"yr{j}"


def terrain_bit(cell, b):
    return f"t{cell[0]}_{cell[1]}_b{b}"


def input_propositions(grid: GridSpec, n_t: int) -> tuple:
    props = [Proposition(robot_x(i), "robot_x") for i in range(grid.n_cols)]
    props += [Proposition(robot_y(j), "robot_y") for j in range(grid.n_rows)]
    props += [Proposition(req_x(i), "req_x") for i in range(grid.n_cols)]
    props += [Proposition(req_y(j), "req_y") for j in range(grid.n_rows)]
    for c in grid.cells():
        props += [Proposition(terrain_bit(c, b), "terrain_bit", c, b) for b in range(n_bits(n_t))]
    return tuple(props)


def int_to_bool(terrain_state: Sequence[int], n_t: int) -> tuple:
    """Little-endian bits per cell, ceil(log2 n_t) bits each."""
    nb = n_bits(n_t)
    out = []
    for code in terrain_state:
        if not 0 <= code < n_t:
            raise CodeRangeError(f"terrain code {code} outside [0, {n_t})")
        out.append(tuple((code >> b) & 1 for b in range(nb)))
    return tuple(out)


def robot_cell_formula(grid: GridSpec, cell, next_step=True) -> Formula:
    i0, j0 = cell
    parts = [lit(robot_x(i), i == i0, next_step) for i in range(grid.n_cols)]
    parts += [lit(robot_y(j), j == j0, next_step) for j in range(grid.n_rows)]
    return conj(parts)


def terrain_code_formula(cell, code: int, n_t: int, next_step=True) -> list:
    return [lit(terrain_bit(cell, b), bool((code >> b) & 1), next_step) for b in range(n_bits(n_t))]


# -- skills -------------------------------------------------------------------------

@dataclass(frozen=True)
class Precondition:
    cell: tuple
    terrain: tuple = ()  # ((cell, code), ...) sorted by cell


@dataclass(frozen=True)
class Skill:
    """Symbolic transition. ``kind`` is (direction, source type, target type) for grid moves."""

    id: str
    pre: tuple
    post: tuple
    gait_id: str | None = None
    kind: tuple | None = None

    def __post_init__(self):
        if not self.pre or not self.post:
            raise ValueError(f"skill {self.id}: empty pre- or postcondition")

    @property
    def source(self):
        return self.pre[0].cell

    @property
    def target(self):
        return self.post[0]

    def to_dict(self):
        return {"id": self.id, "gait_id": self.gait_id, "kind": list(self.kind) if self.kind else None,
                "pre": [{"cell": list(p.cell), "terrain": [[list(c), v] for c, v in p.terrain]} for p in self.pre],
                "post": [list(c) for c in self.post]}

    @classmethod
    def from_dict(cls, d):
        pre = tuple(Precondition(tuple(p["cell"]), tuple((tuple(c), int(v)) for c, v in p["terrain"])) for p in d["pre"])
        kind = d.get("kind")
        if kind:
            kind = (tuple(kind[0]),) + tuple(kind[1:]) if isinstance(kind[0], list) else tuple(kind)
        return cls(d["id"], pre, tuple(tuple(c) for c in d["post"]), d.get("gait_id"), kind)


def skill_id(direction, src_name, dst_name, cell) -> str:
    return f"{direction_name(direction)}_{src_name}_{dst_name}@{cell[0]}_{cell[1]}"


def make_move_skill(grid: GridSpec, catalog: TerrainCatalog, cell, direction, src_code, dst_code, gait_id=None):
    target = (cell[0] + direction[0], cell[1] + direction[1])
    frag = tuple(sorted({cell: src_code, target: dst_code}.items()))
    src, dst = catalog.names[src_code], catalog.names[dst_code]
    return Skill(skill_id(direction, src, dst, cell), (Precondition(cell, frag),), (target,), gait_id,
                 (tuple(direction), src, dst))


def enumerate_candidate_skills(grid: GridSpec, movement="4", catalog: TerrainCatalog = None) -> list:
    """One template per (source cell, direction, source type, target type); obstacles never targeted."""
    codes = [catalog.code(n) for n in catalog.walkable]
    out = []
    for cell in grid.cells():
        for d in movement_directions(movement):
            t = (cell[0] + d[0], cell[1] + d[1])
            if not grid.contains(t):
                continue
            for a in codes:
                for b in codes:
                    out.append(make_move_skill(grid, catalog, cell, d, a, b))
    return out


# -- encodings -------------------------------------------------------------------------

def encode_skill_assumptions(skills: Iterable[Skill], grid: GridSpec) -> list:
    return [Implies(cur(o.id), disj([robot_cell_formula(grid, c, True) for c in o.post])) for o in skills]


def _pre_formula(p: Precondition, grid: GridSpec, n_t: int) -> Formula:
    parts = [robot_cell_formula(grid, p.cell, True)]
    for c, code in p.terrain:
        parts += terrain_code_formula(c, code, n_t, True)
    return conj(parts) if len(parts) > 1 else parts[0]


def encode_skill_guarantees(skills: Iterable[Skill], grid: GridSpec, n_t: int) -> list:
    return [Implies(Not(disj([_pre_formula(p, grid, n_t) for p in o.pre])), Not(nxt(o.id))) for o in skills]


def robot_frame_axiom(grid: GridSpec, outputs: Sequence[str]) -> Formula:
    idle = And([Not(cur(o)) for o in outputs])
    names = [robot_x(i) for i in range(grid.n_cols)] + [robot_y(j) for j in range(grid.n_rows)]
    return fold(Implies(idle, And([Iff(cur(n), nxt(n)) for n in names])))


def mutex_clauses(outputs: Sequence[str]) -> list:
    return [Not(And([nxt(a), nxt(b)])) for a, b in itertools.combinations(outputs, 2)]


def encode_hard_constraints(skills: Sequence[Skill], inputs: Sequence[Proposition], grid: GridSpec):
    """(env_hard, sys_hard): frame axioms for static inputs plus the idle frame, and pairwise mutex."""
    env = [Iff(cur(p.id), nxt(p.id)) for p in inputs if p.kind in ("req_x", "req_y", "terrain_bit")]
    env.append(robot_frame_axiom(grid, [o.id for o in skills]))
    return env, mutex_clauses([o.id for o in skills])


def _exactly_one(names, next_step=True):
    atoms = [Atom(n, next_step) for n in names]
    if len(atoms) == 1:
        return atoms[0]
    return And([Or(atoms)] + [Not(And([a, b])) for a, b in itertools.combinations(atoms, 2)])


def domain_clauses(grid: GridSpec, n_t: int) -> list:
    """Index-encoding well-formedness for robot and request, and exclusion of unused terrain codes."""
    out = [_exactly_one([robot_x(i) for i in range(grid.n_cols)]),
           _exactly_one([robot_y(j) for j in range(grid.n_rows)]),
           _exactly_one([req_x(i) for i in range(grid.n_cols)]),
           _exactly_one([req_y(j) for j in range(grid.n_rows)])]
    nb = n_bits(n_t)
    unused = range(n_t, 2 ** nb)
    if len(unused):
        for c in grid.cells():
            out.append(Not(disj([conj(terrain_code_formula(c, code, n_t, True)) for code in unused])))
    return out


def obstacle_clauses(skills: Sequence[Skill], n_t: int, obstacle_code: int | None) -> list:
    if obstacle_code is None:
        return []
    return [Implies(disj([conj(terrain_code_formula(c, obstacle_code, n_t, True)) if n_bits(n_t) else TRUE
                          for c in o.post]), Not(nxt(o.id))) for o in skills]


# -- specification ---------------------------------------------------------------------

@dataclass(frozen=True)
class GR1Spec:
    grid: GridSpec
    n_t: int
    inputs: tuple
    outputs: tuple
    skills: tuple
    env_init: Formula
    sys_init: Formula
    env_safety_skill: tuple
    env_safety_hard: tuple
    sys_safety_skill: tuple
    sys_safety_hard: tuple
    env_liveness: tuple
    sys_liveness: tuple
    obstacle_code: int | None = None
    evaluated_true: frozenset = frozenset()
    evaluated_false: frozenset = frozenset()
    disallowed: tuple = ()  # ((cell, skill_id), ...) already encoded in sys_safety_hard

    def skill(self, sid: str) -> Skill:
        for o in self.skills:
            if o.id == sid:
                return o
        raise KeyError(sid)

    def all_formulas(self):
        yield self.env_init
        yield self.sys_init
        for part in (self.env_safety_skill, self.env_safety_hard, self.sys_safety_skill,
                     self.sys_safety_hard, self.env_liveness, self.sys_liveness):
            yield from part

    def atom_names(self) -> frozenset:
        out = set()
        for f in self.all_formulas():
            out |= f.names()
        return frozenset(out)

    @property
    def is_reduced(self) -> bool:
        robot = {p.id for p in self.inputs if p.kind in ("robot_x", "robot_y")}
        return self.atom_names() <= robot | set(self.outputs)

    def to_dict(self):
        pf = lambda fs: [to_prefix(f) for f in fs]  # noqa: E731
        return {
            "grid": self.grid.to_dict(), "n_t": self.n_t, "obstacle_code": self.obstacle_code,
            "inputs": [[p.id, p.kind] for p in self.inputs], "outputs": list(self.outputs),
            "skills": [o.to_dict() for o in self.skills],
            "env_init": to_prefix(self.env_init), "sys_init": to_prefix(self.sys_init),
            "env_safety_skill": pf(self.env_safety_skill), "env_safety_hard": pf(self.env_safety_hard),
            "sys_safety_skill": pf(self.sys_safety_skill), "sys_safety_hard": pf(self.sys_safety_hard),
            "env_liveness": pf(self.env_liveness), "sys_liveness": pf(self.sys_liveness),
            "evaluated_true": sorted(self.evaluated_true), "evaluated_false": sorted(self.evaluated_false),
            "disallowed": [[list(c), s] for c, s in self.disallowed],
        }

    @classmethod
    def from_dict(cls, d):
        grid = GridSpec.from_dict(d["grid"])
        pp = lambda xs: tuple(parse_prefix(x) for x in xs)  # noqa: E731
        inputs = []
        for pid, kind in d["inputs"]:
            if kind == "terrain_bit":
                head, b = pid[1:].split("_b")
                i, j = head.split("_")
                inputs.append(Proposition(pid, kind, (int(i), int(j)), int(b)))
            else:
                inputs.append(Proposition(pid, kind))
        return cls(grid, d["n_t"], tuple(inputs), tuple(d["outputs"]),
                   tuple(Skill.from_dict(s) for s in d["skills"]),
                   parse_prefix(d["env_init"]), parse_prefix(d["sys_init"]),
                   pp(d["env_safety_skill"]), pp(d["env_safety_hard"]),
                   pp(d["sys_safety_skill"]), pp(d["sys_safety_hard"]),
                   pp(d["env_liveness"]), pp(d["sys_liveness"]), d.get("obstacle_code"),
                   frozenset(d.get("evaluated_true", ())), frozenset(d.get("evaluated_false", ())),
                   tuple((tuple(c), s) for c, s in d.get("disallowed", ())))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def request_goal(grid: GridSpec) -> Formula:
    parts = [Iff(cur(robot_x(i)), cur(req_x(i))) for i in range(grid.n_cols)]
    parts += [Iff(cur(robot_y(j)), cur(req_y(j))) for j in range(grid.n_rows)]
    return And(parts)


def build_spec(skills: Sequence[Skill], grid: GridSpec, n_t: int, init_cells=None,
               obstacle_code: int | None = None, liveness_goal: str = "request-reach") -> GR1Spec:
    """Assemble the six GR(1) parts. The robot starts at rest in one of ``init_cells`` (default: centre)."""
    if liveness_goal != "request-reach":
        raise ValueError("only the request-reach goal is supported")
    skills = tuple(sorted(skills, key=lambda o: o.id))
    if len({o.id for o in skills}) != len(skills):
        raise ValueError("duplicate skill ids")
    if init_cells is None:
        init_cells = [(grid.n_cols // 2, grid.n_rows // 2)]
    inputs = input_propositions(grid, n_t)
    env_hard, sys_hard = encode_hard_constraints(skills, inputs, grid)
    env_hard = env_hard + domain_clauses(grid, n_t)
    sys_hard = sys_hard + obstacle_clauses(skills, n_t, obstacle_code)
    env_init = disj([robot_cell_formula(grid, c, False) for c in sorted(set(map(tuple, init_cells)))])
    sys_init = And([Not(cur(o.id)) for o in skills])
    return GR1Spec(grid, n_t, inputs, tuple(o.id for o in skills), skills, env_init, sys_init,
                   tuple(encode_skill_assumptions(skills, grid)), tuple(env_hard),
                   tuple(encode_skill_guarantees(skills, grid, n_t)), tuple(sys_hard),
                   (TRUE,), (request_goal(grid),), obstacle_code)


def pair_valuation(grid: GridSpec, n_t: int, terrain_state: Sequence[int], request) -> tuple:
    """(true_set, false_set) assigning every terrain bit and request atom."""
    t, f = set(), set()
    for c, bits in zip(grid.cells(), int_to_bool(terrain_state, n_t)):
        for b, v in enumerate(bits):
            (t if v else f).add(terrain_bit(c, b))
    for i in range(grid.n_cols):
        (t if i == request[0] else f).add(req_x(i))
    for j in range(grid.n_rows):
        (t if j == request[1] else f).add(req_y(j))
    return frozenset(t), frozenset(f)


def _pe_list(fs, t, f):
    out = []
    for g in fs:
        h = substitute(g, t, f)
        if not (h is TRUE or h == TRUE):
            out.append(h)
    return tuple(out)


def partial_evaluate(spec: GR1Spec, true_set, false_set) -> GR1Spec:
    """Substitute known input values (current and next layers) and constant-fold.

    Formulas that fold to True are dropped; the substituted propositions leave ``inputs``.
    """
    true_set, false_set = frozenset(true_set), frozenset(false_set)
    if true_set & false_set:
        raise OverlapError("true and false sets intersect")
    known = {p.id for p in spec.inputs}
    if not (true_set | false_set) <= known:
        raise ValueError("partial evaluation only substitutes input propositions")
    gone = true_set | false_set
    return replace(
        spec,
        inputs=tuple(p for p in spec.inputs if p.id not in gone),
        env_init=substitute(spec.env_init, true_set, false_set),
        sys_init=substitute(spec.sys_init, true_set, false_set),
        env_safety_skill=_pe_list(spec.env_safety_skill, true_set, false_set),
        env_safety_hard=_pe_list(spec.env_safety_hard, true_set, false_set),
        sys_safety_skill=_pe_list(spec.sys_safety_skill, true_set, false_set),
        sys_safety_hard=_pe_list(spec.sys_safety_hard, true_set, false_set),
        env_liveness=_pe_list(spec.env_liveness, true_set, false_set) or (TRUE,),
        sys_liveness=tuple(substitute(g, true_set, false_set) for g in spec.sys_liveness),
        evaluated_true=spec.evaluated_true | true_set,
        evaluated_false=spec.evaluated_false | false_set,
    )


def disabled_outputs(spec: GR1Spec) -> list:
    """Outputs whose guarantee folded to an unconditional ban (precondition contradicted)."""
    out = []
    for g in spec.sys_safety_skill:
        if isinstance(g, Not) and isinstance(g.arg, Atom) and g.arg.nxt and g.arg.name in spec.outputs:
            out.append(g.arg.name)
    return out


def remove_outputs(spec: GR1Spec, outputs: Iterable[str]) -> GR1Spec:
    """Drop outputs by substituting False for them everywhere."""
    gone = frozenset(outputs)
    if not gone:
        return spec
    t = frozenset()
    return replace(
        spec,
        outputs=tuple(o for o in spec.outputs if o not in gone),
        skills=tuple(o for o in spec.skills if o.id not in gone),
        env_init=substitute(spec.env_init, t, gone),
        sys_init=substitute(spec.sys_init, t, gone),
        env_safety_skill=_pe_list(spec.env_safety_skill, t, gone),
        env_safety_hard=_pe_list(spec.env_safety_hard, t, gone),
        sys_safety_skill=_pe_list(spec.sys_safety_skill, t, gone),
        sys_safety_hard=_pe_list(spec.sys_safety_hard, t, gone),
        disallowed=tuple(x for x in spec.disallowed if x[1] not in gone),
    )


def filter_disabled(spec: GR1Spec) -> GR1Spec:
    return remove_outputs(spec, disabled_outputs(spec))


def reduce_spec(spec: GR1Spec, terrain_state, request) -> GR1Spec:
    """Partial evaluation over a full (terrain, request) pair followed by skill filtering."""
    t, f = pair_valuation(spec.grid, spec.n_t, terrain_state, request)
    return filter_disabled(partial_evaluate(spec, t, f))


def add_skills(spec: GR1Spec, new_skills: Sequence[Skill]) -> GR1Spec:
    """Extend a (possibly reduced) spec with further skills.

    Skill encodings are regenerated for the union; the idle frame axiom and mutex
    are regenerated, every other hard clause is kept verbatim. Previously applied
    partial evaluation is replayed on the new encodings.
    """
    known = set(spec.outputs)
    fresh = [o for o in new_skills if o.id not in known]
    if not fresh:
        return spec
    old_ids = list(spec.outputs)
    t, f = spec.evaluated_true, spec.evaluated_false
    pe = lambda fs: _pe_list(fs, t, f)  # noqa: E731
    old_frame = pe([robot_frame_axiom(spec.grid, old_ids)])
    old_mutex = set(mutex_clauses(old_ids))
    kept_env = [g for g in spec.env_safety_hard if g not in old_frame]
    ids = sorted(old_ids + [o.id for o in fresh])
    env_hard = tuple(kept_env) + pe([robot_frame_axiom(spec.grid, ids)])
    extra_sys = [g for g in spec.sys_safety_hard if g not in old_mutex]
    sys_hard = tuple(mutex_clauses(ids)) + tuple(extra_sys) + pe(obstacle_clauses(fresh, spec.n_t, spec.obstacle_code))
    skills = tuple(sorted(list(spec.skills) + fresh, key=lambda o: o.id))
    return replace(
        spec,
        outputs=tuple(ids),
        skills=skills,
        sys_init=And([Not(cur(o)) for o in ids]),
        env_safety_skill=spec.env_safety_skill + pe(encode_skill_assumptions(fresh, spec.grid)),
        sys_safety_skill=spec.sys_safety_skill + pe(encode_skill_guarantees(fresh, spec.grid, spec.n_t)),
        env_safety_hard=env_hard,
        sys_safety_hard=sys_hard,
    )


def with_init(spec: GR1Spec, init_cells) -> GR1Spec:
    return replace(spec, env_init=disj([robot_cell_formula(spec.grid, c, False) for c in sorted(set(map(tuple, init_cells)))]))


# -- decoding (inverse check of the encoders) -------------------------------------------

def _decode_cell(f: Formula, grid: GridSpec):
    lits = f.args if isinstance(f, And) else (f,)
    xs = [a.name for a in lits if isinstance(a, Atom) and a.name.startswith("x")]
    ys = [a.name for a in lits if isinstance(a, Atom) and a.name.startswith("y")]
    if len(xs) != 1 or len(ys) != 1:
        raise ValueError("not a robot valuation")
    return (int(xs[0][1:]), int(ys[0][1:]))


def decode_assumption(f: Formula, grid: GridSpec):
    """Recover (skill id, postcondition cells) from an encoded assumption."""
    o = f.lhs.name
    terms = f.rhs.args if isinstance(f.rhs, Or) else (f.rhs,)
    return o, tuple(_decode_cell(t, grid) for t in terms)


def decode_guarantee(f: Formula, grid: GridSpec, n_t: int):
    """Recover (skill id, preconditions) from an encoded guarantee."""
    o = f.rhs.arg.name
    body = f.lhs.arg
    terms = body.args if isinstance(body, Or) else (body,)
    pres = []
    for t in terms:
        lits = t.args if isinstance(t, And) else (t,)
        robot = [a for a in lits if (a.arg if isinstance(a, Not) else a).name[0] in "xy"]
        cell = _decode_cell(conj(robot) if len(robot) > 1 else robot[0], grid)
        bits = {}
        for a in lits:
            atom = a.arg if isinstance(a, Not) else a
            if atom.name.startswith("t"):
                head, b = atom.name[1:].split("_b")
                i, j = head.split("_")
                bits.setdefault((int(i), int(j)), 0)
                if not isinstance(a, Not):
                    bits[(int(i), int(j))] |= 1 << int(b)
        pres.append(Precondition(cell, tuple(sorted(bits.items()))))
    return o, tuple(pres)
