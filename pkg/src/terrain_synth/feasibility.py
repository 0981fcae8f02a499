"""Physical feasibility of symbolic skills: MICP instances for one-cell moves.

Offline, a skill kind (direction, source type, target type) is checked once on
template footholds in a canonical two-cell layout, since the result does not
depend on where in the grid the move happens. The gait-free oracle used by
repair works the same way, or on actual online polygons when given a scenario.
"""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .abstraction import GridSpec, cell_height, polygons_by_cell
from .micp import (FEAS, INFEAS, NUMERICAL, OPTIMAL, TIMEOUT, MicpConfig, Pose, RobotModel, build_gait_fixed,
                   build_gait_free, extract_gait, solve, unpack)
from .micp.bnb import smooth
from .micp.check import check_solution
from .templates import cell_polygons, polygons_near, type_height

FEASIBLE, INFEASIBLE, TIMED_OUT = "feasible", "infeasible", "timeout"


def standing_pose(grid: GridSpec, cell, ground_z: float, model: RobotModel) -> Pose:
    """Robot at a cell centre, facing the grid's +v direction."""
    c = grid.cell_center(cell)
    return Pose((float(c[0]), float(c[1]), ground_z - model.p_ref[2]), (0.0, 0.0, grid.heading + math.pi / 2))


def canonical_layout(kind, cell_size: float):
    """(grid, source cell, target cell, polygons) for a move of the given kind on template footholds."""
    d, src, dst = kind
    grid = GridSpec((0.0, 0.0), 3, 3, cell_size)
    a = (1, 1)
    b = (1 + d[0], 1 + d[1])
    polys = cell_polygons(src, grid, a) + cell_polygons(dst, grid, b)
    return grid, a, b, polys


def _verdict(status):
    if status in (FEAS, OPTIMAL):
        return FEASIBLE
    if status == INFEAS:
        return INFEASIBLE
    return TIMED_OUT


@dataclass
class KindCheck:
    kind: tuple
    gait_id: str | None
    attempts: list = field(default_factory=list)  # (gait id, verdict, seconds, nodes)
    seconds: float = 0.0

    @property
    def certified(self) -> bool:
        return self.gait_id is not None

    def to_dict(self):
        return {"kind": [list(self.kind[0]), self.kind[1], self.kind[2]], "gait_id": self.gait_id,
                "attempts": [list(a) for a in self.attempts], "seconds": self.seconds}


def check_kind(kind, gaits, model: RobotModel, cfg: MicpConfig, cell_size: float,
               deterministic: bool = False) -> KindCheck:
    """Try each catalog gait in order on the template layout; the first feasible one binds."""
    t0 = time.perf_counter()
    grid, a, b, polys = canonical_layout(kind, cell_size)
    p0 = standing_pose(grid, a, type_height(kind[1]), model)
    p1 = standing_pose(grid, b, type_height(kind[2]), model)
    out = KindCheck(tuple(kind), None)
    for g in gaits:
        s = time.perf_counter()
        prob = build_gait_fixed(p0, p1, polys, g, model, cfg)
        res = solve(prob, "feasibility", cfg, deterministic=deterministic)
        out.attempts.append((g.id, _verdict(res.status), round(time.perf_counter() - s, 4), res.nodes))
        if res.ok:
            out.gait_id = g.id
            break
    out.seconds = time.perf_counter() - t0
    return out


def gait_signature(contact: np.ndarray, dt: float) -> str:
    h = hashlib.sha1(np.ascontiguousarray(contact, dtype=np.uint8).tobytes() + repr(dt).encode()).hexdigest()
    return h[:10]


@dataclass
class OracleVerdict:
    status: str
    gait: object = None  # Gait when feasible
    seconds: float = 0.0
    nodes: int = 0
    cached: bool = False
    trajectory: object = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


class GaitFreeOracle:
    """Gait-free MICP on template footholds for a (source cell, target cell, types) query.

    Results are cached per move kind; ``calls`` counts actual MICP solves.
    """

    def __init__(self, catalog, model: RobotModel, cfg: MicpConfig = MicpConfig(), cell_size: float = 0.8,
                 deterministic: bool = False):
        self.catalog = catalog
        self.model = model
        self.cfg = cfg
        self.cell_size = cell_size
        self.deterministic = deterministic
        self.calls = 0
        self.seconds = 0.0
        self._cache = {}

    def _instance(self, grid, src, dst, src_name, dst_name):
        d = (dst[0] - src[0], dst[1] - src[1])
        g, a, b, polys = canonical_layout((d, src_name, dst_name), self.cell_size)
        p0 = standing_pose(g, a, type_height(src_name), self.model)
        p1 = standing_pose(g, b, type_height(dst_name), self.model)
        return (d, src_name, dst_name), p0, p1, polys

    def query(self, grid: GridSpec, src, dst, src_name: str, dst_name: str) -> OracleVerdict:
        key, p0, p1, polys = self._instance(grid, src, dst, src_name, dst_name)
        if key in self._cache:
            v = self._cache[key]
            return OracleVerdict(v.status, v.gait, 0.0, 0, True, v.trajectory)
        v = self._solve(key, p0, p1, polys)
        self._cache[key] = v
        return v

    def _solve(self, key, p0, p1, polys) -> OracleVerdict:
        t0 = time.perf_counter()
        self.calls += 1
        prob = build_gait_free(p0, p1, polys, self.model, self.cfg)
        res = solve(prob, "feasibility", self.cfg, deterministic=self.deterministic)
        dt = time.perf_counter() - t0
        self.seconds += dt
        if not res.ok:
            return OracleVerdict(_verdict(res.status), None, dt, res.nodes)
        traj = unpack(prob, res.x)
        if not check_solution(prob, traj).passed:
            return OracleVerdict(TIMED_OUT, None, dt, res.nodes)
        a, b = key[-2:]
        sig = gait_signature(traj.contact, self.cfg.dt)
        gait = extract_gait(traj, f"free_{a}_{b}_{sig}")
        return OracleVerdict(FEASIBLE, gait, dt, res.nodes, False, traj)


class OnlineOracle(GaitFreeOracle):
    """Gait-free MICP on the actual polygons around the two cells of a local window."""

    def __init__(self, polygons, catalog, model, cfg=MicpConfig(), deterministic=False):
        super().__init__(catalog, model, cfg, 0.0, deterministic)
        self.polygons = list(polygons)

    def _instance(self, grid, src, dst, src_name, dst_name):
        lo = np.minimum(*(np.array(grid.cell_box(c)[0]) for c in (src, dst))) - 0.05
        hi = np.maximum(*(np.array(grid.cell_box(c)[1]) for c in (src, dst))) + 0.05
        near = polygons_near(self.polygons, lo, hi)
        pieces = polygons_by_cell(near, grid)
        p0 = standing_pose(grid, src, cell_height(pieces[src]), self.model)
        p1 = standing_pose(grid, dst, cell_height(pieces[dst]), self.model)
        key = (tuple(np.round(grid.cell_center(src), 6)), tuple(np.round(grid.cell_center(dst), 6)), src_name, dst_name)
        return key, p0, p1, near


def smooth_solution(prob, res, cfg):
    """Tracking-cost polish of a feasible point (binaries held)."""
    sm = smooth(prob, res.x, cfg)
    return sm.x, sm.objective


__all__ = ["FEASIBLE", "INFEASIBLE", "TIMED_OUT", "KindCheck", "OracleVerdict", "GaitFreeOracle", "OnlineOracle",
           "check_kind", "canonical_layout", "standing_pose", "gait_signature", "NUMERICAL", "TIMEOUT"]
