"""Symbolic repair: grow the winning region by suggesting modified skills.

Each round retargets either the precondition of a skill that already ends in a
winning cell (to a losing neighbour), or the postcondition of a skill that starts
and ends in losing cells (to a winning neighbour). A suggestion only becomes a
skill once the feasibility oracle finds a gait for it; rejected suggestions are
remembered so they are never proposed again.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

from .errors import UnrepairableError
from .formula import And, Implies, Not, nxt
from .spec import (GR1Spec, Precondition, Skill, add_skills, direction_name, make_move_skill, movement_directions,
                   robot_x, robot_y, terrain_bit)
from .synthesis import build_game, solve_game

PRE_MODE = "precondition_modified"
POST_MODE = "postcondition_modified"
MODES = (PRE_MODE, POST_MODE)

OFFLINE_INFEASIBLE = "offline_infeasible"
OFFLINE_TIMEOUT = "offline_timeout"
RUNTIME_FAILURE = "runtime_failure"


@dataclass(frozen=True)
class RepairSuggestion:
    base_skill_id: str
    pre: tuple  # (Precondition,)
    post: tuple  # (cell,)
    mode: str

    @property
    def key(self):
        return transition_key(self.pre[0].cell, self.pre[0].terrain, self.post[0])

    def to_dict(self):
        p = self.pre[0]
        return {"base_skill": self.base_skill_id, "mode": self.mode, "source": list(p.cell),
                "terrain": [[list(c), v] for c, v in p.terrain], "target": list(self.post[0])}


def transition_key(source, fragment, target):
    return (tuple(source), tuple((tuple(c), int(v)) for c, v in fragment), tuple(target))


@dataclass(frozen=True)
class LedgerEntry:
    source: tuple
    fragment: tuple
    target: tuple
    tag: str
    skill_id: str | None = None

    @property
    def key(self):
        return transition_key(self.source, self.fragment, self.target)

    def to_dict(self):
        return {"source": list(self.source), "fragment": [[list(c), v] for c, v in self.fragment],
                "target": list(self.target), "tag": self.tag, "skill_id": self.skill_id}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["source"]), tuple((tuple(c), int(v)) for c, v in d["fragment"]), tuple(d["target"]),
                   d["tag"], d.get("skill_id"))


class DisallowedLedger:
    """Transitions known to be infeasible, in the coordinates of the local window."""

    def __init__(self, entries=()):
        self.entries = []
        self._keys = {}
        for e in entries:
            self.add(e)

    def add(self, entry: LedgerEntry) -> bool:
        """Record an entry; returns False when the transition was already known."""
        if entry.key in self._keys:
            # a hard failure outranks a timeout for the same transition
            old = self._keys[entry.key]
            if old.tag == OFFLINE_TIMEOUT and entry.tag != OFFLINE_TIMEOUT:
                self.entries[self.entries.index(old)] = entry
                self._keys[entry.key] = entry
            return False
        self.entries.append(entry)
        self._keys[entry.key] = entry
        return True

    def __contains__(self, key) -> bool:
        return key in self._keys

    def __len__(self):
        return len(self.entries)

    def tagged(self, tag):
        return [e for e in self.entries if e.tag == tag]

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        return cls(LedgerEntry.from_dict(e) for e in d.get("entries", ()))


# -- disallowed transitions as hard constraints -------------------------------------------

def add_disallowed(spec: GR1Spec, transition, ledger: DisallowedLedger | None = None,
                   tag: str = RUNTIME_FAILURE) -> GR1Spec:
    """Forbid executing skill ``transition[1]`` from cell ``transition[0]``.

    Appends the system clause  (next robot at cell) -> not next skill; idempotent.
    """
    cell, sid = tuple(transition[0]), transition[1]
    if ledger is not None and sid in spec.outputs:
        sk = spec.skill(sid)
        frag = next((p.terrain for p in sk.pre if p.cell == cell), ())
        ledger.add(LedgerEntry(cell, frag, sk.target, tag, sid))
    if (cell, sid) in spec.disallowed:
        return spec
    extra = ()
    if sid in spec.outputs:
        extra = (Implies(And([nxt(robot_x(cell[0])), nxt(robot_y(cell[1]))]), Not(nxt(sid))),)
    return replace(spec, sys_safety_hard=spec.sys_safety_hard + extra,
                   disallowed=spec.disallowed + ((cell, sid),))


# -- helpers ------------------------------------------------------------------------------

def terrain_of(spec: GR1Spec) -> dict:
    """Terrain codes recovered from the bits substituted by partial evaluation."""
    from .spec import n_bits
    nb = n_bits(spec.n_t)
    out = {}
    for c in spec.grid.cells():
        code, known = 0, True
        for b in range(nb):
            name = terrain_bit(c, b)
            if name in spec.evaluated_true:
                code |= 1 << b
            elif name not in spec.evaluated_false:
                known = False
        if known:
            out[c] = code
    return out


def winning_cells(spec: GR1Spec, game=None, solution=None) -> set:
    """Cells whose resting state (no skill running) is winning."""
    game = game or build_game(spec)
    sol = solution or solve_game(game)
    out = set()
    for s in range(game.n_states):
        cell, skill = game.describe(s)
        if skill is None and sol.winning[s]:
            out.add(cell)
    return out


def _neighbours(grid, cell, movement):
    for d in movement_directions(movement):
        t = (cell[0] + d[0], cell[1] + d[1])
        if grid.contains(t):
            yield t


def _fragment(terrain, a, b):
    return tuple(sorted({a: terrain[a], b: terrain[b]}.items()))


def candidate_suggestions(spec: GR1Spec, win: set, mode: str, terrain: dict, ledger: DisallowedLedger,
                          movement="4") -> list:
    """All admissible suggestions of one mode, sorted, one per distinct transition."""
    grid = spec.grid
    obstacle = spec.obstacle_code
    existing = set()
    for o in spec.skills:
        for p in o.pre:
            for q in o.post:
                existing.add(transition_key(p.cell, p.terrain, q))
    out = {}
    for o in sorted(spec.skills, key=lambda o: o.id):
        src, dst = o.source, o.target
        if mode == PRE_MODE:
            if dst not in win:
                continue
            pairs = [(n, dst) for n in _neighbours(grid, dst, movement) if n not in win]
        else:
            if src in win or dst in win:
                continue
            pairs = [(src, n) for n in _neighbours(grid, src, movement) if n in win]
        for a, b in pairs:
            if a not in terrain or b not in terrain:
                continue
            if obstacle is not None and (terrain[b] == obstacle or terrain[a] == obstacle):
                continue
            frag = _fragment(terrain, a, b)
            key = transition_key(a, frag, b)
            if key in existing or key in ledger or key in out:
                continue
            out[key] = RepairSuggestion(o.id, (Precondition(a, frag),), (b,), mode)
    return [out[k] for k in sorted(out)]


@dataclass
class RepairResult:
    spec: GR1Spec
    realizable: bool
    new_skills: list = field(default_factory=list)
    gaits: dict = field(default_factory=dict)  # gait id -> Gait for the new skills
    log: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "realizable" if self.realizable else "unrepairable"

    @property
    def n_suggestions(self) -> int:
        return len(self.log)


def repair(spec: GR1Spec, oracle, ledger: DisallowedLedger, seed: int = 0, movement="4",
           max_suggestions: int | None = None, raise_on_failure: bool = False) -> RepairResult:
    """Alternate precondition and postcondition rounds until the spec is realizable.

    ``oracle.query(grid, src, dst, src_name, dst_name)`` returns a verdict with
    ``status`` and, when feasible, a ``gait``. The oracle's catalog names the
    terrain codes.
    """
    rng = random.Random(seed)
    terrain = terrain_of(spec)
    names = oracle.catalog.names
    cur = spec
    result = RepairResult(spec, False)
    turn = 0
    while True:
        game = build_game(cur)
        sol = solve_game(game)
        if sol.realizable:
            result.spec, result.realizable = cur, True
            return result
        if max_suggestions is not None and len(result.log) >= max_suggestions:
            break
        win = winning_cells(cur, game, sol)
        pick = None
        for _ in range(2):
            mode = MODES[turn % 2]
            turn += 1
            cands = candidate_suggestions(cur, win, mode, terrain, ledger, movement)
            if cands:
                pick = cands[rng.randrange(len(cands))]
                break
        if pick is None:
            break
        a, b = pick.pre[0].cell, pick.post[0]
        verdict = oracle.query(cur.grid, a, b, names[terrain[a]], names[terrain[b]])
        rec = pick.to_dict()
        rec.update(kind=[direction_name((b[0] - a[0], b[1] - a[1])), names[terrain[a]], names[terrain[b]]],
                   verdict=verdict.status, seconds=round(verdict.seconds, 4), cached=verdict.cached)
        if verdict.feasible:
            d = (b[0] - a[0], b[1] - a[1])
            sk = make_move_skill(cur.grid, oracle.catalog, a, d, terrain[a], terrain[b], verdict.gait.id)
            rec["skill"] = sk.id
            rec["gait_id"] = verdict.gait.id
            result.new_skills.append(sk)
            result.gaits[verdict.gait.id] = verdict.gait
            cur = add_skills(cur, [sk])
        else:
            tag = OFFLINE_TIMEOUT if verdict.status == "timeout" else OFFLINE_INFEASIBLE
            ledger.add(LedgerEntry(a, pick.pre[0].terrain, b, tag))
        result.log.append(rec)
    result.spec = cur
    if raise_on_failure:
        raise UnrepairableError("no admissible suggestion makes the specification realizable",
                                suggestions=len(result.log))
    return result


def write_log(records, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


__all__ = ["RepairSuggestion", "LedgerEntry", "DisallowedLedger", "RepairResult", "repair", "add_disallowed",
           "candidate_suggestions", "winning_cells", "terrain_of", "write_log", "transition_key",
           "PRE_MODE", "POST_MODE", "OFFLINE_INFEASIBLE", "OFFLINE_TIMEOUT", "RUNTIME_FAILURE", "Skill"]
