"""Offline synthesis: sweep local windows, certify skills, synthesize a strategy per pair.

The skill catalog is kept at the level of move kinds (direction, source type,
target type). A kind certified on template footholds holds for every cell of the
local window, so each pair's skills are the catalog kinds instantiated on that
pair's terrain.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from .abstraction import ClassifierConfig, GridSpec, TerrainCatalog, abstract_grid
from .feasibility import GaitFreeOracle, check_kind
from .micp import MicpConfig, RobotModel
from .micp.gaits import Gait
from .repair import RUNTIME_FAILURE, DisallowedLedger, add_disallowed, repair
from .spec import (build_spec, direction_name, enumerate_candidate_skills, make_move_skill, movement_directions,
                   reduce_spec)
from .synthesis import StrategyAutomaton, synthesize, verify_strategy

SWEEP, REPAIRED, RUNTIME = "sweep", "repair", "runtime_repair"


# -- windows ------------------------------------------------------------------------------

def map_codes(polygons, grid: GridSpec, catalog: TerrainCatalog, cfg: ClassifierConfig = ClassifierConfig()) -> dict:
    """{cell: code} over a whole map."""
    return {c: t.code for c, t in abstract_grid(polygons, grid, cfg, catalog).items()}


def window_grid(grid: GridSpec, center, size=(3, 3)) -> GridSpec:
    w, h = size
    return grid.sub_grid((center[0] - w // 2, center[1] - h // 2), w, h)


def window_state(codes: dict, center, size, obstacle_code: int) -> tuple:
    """Terrain codes of the window centred on ``center``; cells off the map count as obstacles."""
    w, h = size
    out = []
    for v in range(h):
        for u in range(w):
            c = (center[0] - w // 2 + u, center[1] - h // 2 + v)
            out.append(codes.get(c, obstacle_code))
    return tuple(out)


def request_cells(size=(3, 3)) -> list:
    """Top row of the window plus its two bottom corners (robot faces +v)."""
    w, h = size
    top = [(i, h - 1) for i in range(w)]
    return top + [(0, 0), (w - 1, 0)]


def sweep_terrain_states(codes: dict, map_grid: GridSpec, catalog: TerrainCatalog, size=(3, 3),
                         exclude=()) -> tuple:
    """(terrain states, request states) from windows centred on every walkable map cell.

    States containing an excluded type name are dropped.
    """
    obstacle = catalog.code(catalog.obstacle) if catalog.obstacle else -1
    banned = {catalog.code(n) for n in exclude}
    states = set()
    for c in map_grid.cells():
        if codes[c] == obstacle:
            continue
        s = window_state(codes, c, size, obstacle)
        if banned & set(s):
            continue
        states.add(s)
    return sorted(states), request_cells(size)


def map_kinds(codes: dict, map_grid: GridSpec, catalog: TerrainCatalog, movement="4") -> list:
    """Move kinds that occur between adjacent walkable cells of the map."""
    out = set()
    for c in map_grid.cells():
        for d in movement_directions(movement):
            t = (c[0] + d[0], c[1] + d[1])
            if t not in codes or catalog.is_obstacle(codes[c]) or catalog.is_obstacle(codes[t]):
                continue
            out.add((tuple(d), catalog.names[codes[c]], catalog.names[codes[t]]))
    return sorted(out)


def all_kinds(catalog: TerrainCatalog, movement="4") -> list:
    return sorted((tuple(d), a, b) for d in movement_directions(movement) for a in catalog.walkable
                  for b in catalog.walkable)


def terrain_hash(state) -> str:
    return hashlib.sha1(",".join(map(str, state)).encode()).hexdigest()[:12]


def pair_name(state, request) -> str:
    return f"{terrain_hash(state)}_{request[0]}_{request[1]}"


# -- library ---------------------------------------------------------------------------------

@dataclass
class KindEntry:
    kind: tuple
    gait_id: str
    origin: str

    def to_dict(self):
        return {"kind": [direction_name(self.kind[0]), list(self.kind[0]), self.kind[1], self.kind[2]],
                "gait_id": self.gait_id, "origin": self.origin}

    @classmethod
    def from_dict(cls, d):
        k = d["kind"]
        return cls((tuple(k[1]), k[2], k[3]), d["gait_id"], d["origin"])


@dataclass
class StrategyLibrary:
    grid: GridSpec
    catalog: TerrainCatalog
    kinds: dict = field(default_factory=dict)  # kind -> KindEntry
    gaits: dict = field(default_factory=dict)  # gait id -> Gait
    strategies: dict = field(default_factory=dict)  # (state, request) -> {"automaton", "skills"}
    ledger: DisallowedLedger = field(default_factory=DisallowedLedger)
    coverage: dict = field(default_factory=dict)  # (state, request) -> status string
    meta: dict = field(default_factory=dict)

    def add_kind(self, kind, gait: Gait, origin: str):
        kind = (tuple(kind[0]), kind[1], kind[2])
        if kind in self.kinds:
            return False
        self.kinds[kind] = KindEntry(kind, gait.id, origin)
        self.gaits.setdefault(gait.id, gait)
        return True

    def skills_for(self, state, grid: GridSpec | None = None, movement="4") -> list:
        """Catalog kinds instantiated on the cells of a window with terrain ``state``."""
        grid = grid or self.grid
        codes = dict(zip(grid.cells(), state))
        out = []
        for cell in grid.cells():
            a = codes[cell]
            if self.catalog.is_obstacle(a):
                continue
            for d in movement_directions(movement):
                t = (cell[0] + d[0], cell[1] + d[1])
                if t not in codes or self.catalog.is_obstacle(codes[t]):
                    continue
                kind = (tuple(d), self.catalog.names[a], self.catalog.names[codes[t]])
                e = self.kinds.get(kind)
                if e is not None:
                    out.append(make_move_skill(grid, self.catalog, cell, d, a, codes[t], e.gait_id))
        return out

    def strategy(self, state, request):
        rec = self.strategies.get((tuple(state), tuple(request)))
        return None if rec is None else rec["automaton"]

    # persistence
    def save(self, root):
        os.makedirs(os.path.join(root, "strategies"), exist_ok=True)
        cat = {"grid": self.grid.to_dict(), "terrain_catalog": self.catalog.to_dict(),
               "kinds": [self.kinds[k].to_dict() for k in sorted(self.kinds)],
               "gaits": [self.gaits[g].to_dict() for g in sorted(self.gaits)], "meta": self.meta,
               "coverage": [[list(s), list(r), st] for (s, r), st in sorted(self.coverage.items())]}
        _dump(os.path.join(root, "catalog.json"), cat)
        _dump(os.path.join(root, "ledger.json"), self.ledger.to_dict())
        for (s, r), rec in sorted(self.strategies.items()):
            _dump(os.path.join(root, "strategies", pair_name(s, r) + ".json"),
                  {"terrain": list(s), "request": list(r), "automaton": rec["automaton"].to_dict(),
                   "skills": [o.to_dict() for o in rec["skills"]]})

    @classmethod
    def load(cls, root):
        from .spec import Skill
        with open(os.path.join(root, "catalog.json")) as fh:
            cat = json.load(fh)
        lib = cls(GridSpec.from_dict(cat["grid"]), TerrainCatalog.from_dict(cat["terrain_catalog"]))
        for d in cat["kinds"]:
            e = KindEntry.from_dict(d)
            lib.kinds[e.kind] = e
        for d in cat["gaits"]:
            g = Gait.from_dict(d)
            lib.gaits[g.id] = g
        lib.meta = cat.get("meta", {})
        lib.coverage = {(tuple(s), tuple(r)): st for s, r, st in cat.get("coverage", [])}
        with open(os.path.join(root, "ledger.json")) as fh:
            lib.ledger = DisallowedLedger.from_dict(json.load(fh))
        sdir = os.path.join(root, "strategies")
        for name in sorted(os.listdir(sdir)) if os.path.isdir(sdir) else []:
            with open(os.path.join(sdir, name)) as fh:
                d = json.load(fh)
            lib.strategies[(tuple(d["terrain"]), tuple(d["request"]))] = {
                "automaton": StrategyAutomaton.from_dict(d["automaton"]),
                "skills": [Skill.from_dict(o) for o in d["skills"]]}
        return lib


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- offline pipeline --------------------------------------------------------------------------

@dataclass
class SynthesisReport:
    pairs_total: int = 0
    pairs_solved: int = 0
    skills_original: int = 0
    skills_new: int = 0
    skills_total_possible: int = 0
    candidate_transitions: int = 0
    suggestions: int = 0
    oracle_calls: int = 0
    repair_seconds: float | None = 0.0
    gait_fixed_seconds: float | None = 0.0
    gait_free_seconds: float | None = 0.0
    unrepairable: list = field(default_factory=list)
    counting: str = "total possible skills = directions x walkable types^2"

    @property
    def call_reduction(self) -> float:
        """Fraction of gait-free solves avoided relative to checking every candidate."""
        if not self.candidate_transitions:
            return 0.0
        return 1.0 - self.oracle_calls / self.candidate_transitions

    def to_dict(self):
        d = dict(self.__dict__)
        d["unrepairable"] = [[list(s), list(r)] for s, r in self.unrepairable]
        d["call_reduction"] = round(self.call_reduction, 6)
        return d


def offline_feasibility_sweep(kinds, gaits, model: RobotModel, cfg: MicpConfig, cell_size: float,
                              deterministic: bool = False):
    """Certify move kinds with the first catalog gait that admits a feasible MICP.

    Returns (certified {kind: gait}, checks). Kinds with no feasible gait are
    simply dropped; repair may revive them with a new gait later.
    """
    by_id = {g.id: g for g in gaits}
    certified, checks = {}, []
    for kind in kinds:
        chk = check_kind(kind, gaits, model, cfg, cell_size, deterministic)
        checks.append(chk)
        if chk.certified:
            certified[tuple(kind)] = by_id[chk.gait_id]
    return certified, checks


def synthesize_pair(lib: StrategyLibrary, state, request, grid: GridSpec, oracle=None, seed: int = 0,
                    init_cells=None, repair_log=None, disallowed=(), origin: str = REPAIRED):
    """Reduce, synthesize and (if needed) repair one pair. Returns (status, automaton or None, reduced spec).

    ``disallowed`` lists (cell, skill id) transitions forbidden as hard constraints.
    """
    obstacle = lib.catalog.code(lib.catalog.obstacle) if lib.catalog.obstacle else None
    skills = lib.skills_for(state, grid)
    spec = build_spec(skills, grid, lib.catalog.n_t, init_cells=init_cells, obstacle_code=obstacle)
    red = reduce_spec(spec, state, request)
    for t in disallowed:
        red = add_disallowed(red, t, lib.ledger, RUNTIME_FAILURE)
    ok, auto, game, _ = synthesize(red)
    status = "synthesized"
    if not ok and oracle is not None:
        res = repair(red, oracle, lib.ledger, seed=seed)
        if repair_log is not None:
            repair_log.extend(res.log)
        for sk in res.new_skills:
            lib.add_kind(sk.kind, res.gaits[sk.gait_id], origin)
        red = res.spec
        if res.realizable:
            ok, auto, game, _ = synthesize(red)
            status = "repaired"
    if not ok:
        return "unrealizable", None, red
    if not verify_strategy(game, auto, red):
        raise AssertionError("extracted strategy failed verification")
    return status, auto, red


def synthesize_all(lib: StrategyLibrary, states, requests, oracle=None, seed: int = 0,
                   report: SynthesisReport | None = None, timed: bool = True, repair_log=None):
    """Synthesize every (terrain, request) pair in sorted order; new kinds are shared by later pairs."""
    report = report or SynthesisReport()
    grid = GridSpec((0.0, 0.0), lib.grid.n_cols, lib.grid.n_rows, lib.grid.cell_size)
    pairs = sorted((tuple(s), tuple(r)) for s in states for r in requests)
    n_before = len(lib.kinds)
    t0 = time.perf_counter()
    log = repair_log if repair_log is not None else []
    for k, (s, r) in enumerate(pairs):
        codes = dict(zip(grid.cells(), s))
        if lib.catalog.is_obstacle(codes[r]):
            continue
        report.pairs_total += 1
        status, auto, red = synthesize_pair(lib, s, r, grid, oracle, seed + k, repair_log=log)
        lib.coverage[(s, r)] = status
        if auto is None:
            report.unrepairable.append((s, r))
            continue
        report.pairs_solved += 1
        lib.strategies[(s, r)] = {"automaton": auto, "skills": list(red.skills)}
    report.skills_new += len(lib.kinds) - n_before
    report.suggestions += len(log)
    if oracle is not None:
        report.oracle_calls = oracle.calls
        report.gait_free_seconds = round(oracle.seconds, 3) if timed else None
    report.repair_seconds = round(time.perf_counter() - t0, 3) if timed else None
    return lib, report


def run_offline(polygons, map_grid: GridSpec, catalog: TerrainCatalog, gaits, model: RobotModel,
                cfg: MicpConfig = MicpConfig(), window=(3, 3), seed: int = 0, exclude=(),
                classifier: ClassifierConfig = ClassifierConfig(), deterministic: bool = False,
                kinds=None, repair_log=None):
    """Full offline pipeline on one scenario; returns (library, report, sweep checks)."""
    codes = map_codes(polygons, map_grid, catalog, classifier)
    states, requests = sweep_terrain_states(codes, map_grid, catalog, window, exclude)
    local = GridSpec((0.0, 0.0), window[0], window[1], map_grid.cell_size)
    lib = StrategyLibrary(local, catalog)
    kinds = map_kinds(codes, map_grid, catalog) if kinds is None else kinds
    t0 = time.perf_counter()
    certified, checks = offline_feasibility_sweep(kinds, gaits, model, cfg, map_grid.cell_size, deterministic)
    t_fixed = time.perf_counter() - t0
    for kind, g in sorted(certified.items()):
        lib.add_kind(kind, g, SWEEP)
    total = len(all_kinds(catalog))
    report = SynthesisReport(skills_original=len(lib.kinds), skills_total_possible=total,
                             candidate_transitions=total,
                             gait_fixed_seconds=None if deterministic else round(t_fixed, 3))
    oracle = GaitFreeOracle(catalog, model, cfg, map_grid.cell_size, deterministic)
    lib, report = synthesize_all(lib, states, requests, oracle, seed, report, timed=not deterministic,
                                 repair_log=repair_log)
    lib.meta = {"model": model.name, "window": list(window), "seed": seed, "exclude": sorted(exclude),
                "terrain_states": len(states), "requests": [list(r) for r in requests],
                "swept_kinds": len(kinds)}
    return lib, report, checks


__all__ = ["StrategyLibrary", "SynthesisReport", "KindEntry", "sweep_terrain_states", "offline_feasibility_sweep",
           "synthesize_all", "synthesize_pair", "run_offline", "map_codes", "window_state", "window_grid",
           "request_cells", "map_kinds", "all_kinds", "terrain_hash", "pair_name", "enumerate_candidate_skills"]
