"""Online execution of strategy automata over a (possibly perturbed) terrain map.

The robot is assumed to track each MICP trajectory exactly, so a successful solve
moves it to the skill's target cell with the final feet of that trajectory.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..abstraction import GridSpec, cell_height, polygons_by_cell
from ..errors import NoCandidateError
from ..feasibility import OnlineOracle, standing_pose
from ..manager import RUNTIME, StrategyLibrary, map_codes, request_cells, synthesize_pair, terrain_hash, window_grid, window_state
from ..micp import MicpConfig, Pose, RobotModel, build_gait_fixed, check_solution, solve, unpack
from ..micp.bnb import smooth
from ..micp.retarget import retarget_pose
from ..templates import polygons_near
from .scenario import TerrainScenario
from .schedule import schedule

TAGS = ("advance", "retarget", "solve_failure", "unseen_state", "runtime_repair", "resynthesis", "goal_reached",
        "stuck")
LP_SECONDS = 0.035  # nominal cost of one relaxation, used as planning time in deterministic mode
MAX_FAILED_REPAIRS = 3


def local_waypoint(goal, window: GridSpec, state, obstacle_code, candidates=None):
    """Local request cell steering toward the world point ``goal``.

    The goal's own cell wins when it lies inside the window; otherwise the candidate
    (default: every boundary cell) nearest to the goal, ties broken by cell index.
    """
    codes = dict(zip(window.cells(), state))
    centre = (window.n_cols // 2, window.n_rows // 2)
    uv = window.to_grid(goal) / window.cell_size
    gc = (int(math.floor(uv[0])), int(math.floor(uv[1])))
    if window.contains(gc) and gc != centre and codes[gc] != obstacle_code:
        return gc
    if candidates is None:
        candidates = [c for c in window.cells()
                      if c[0] in (0, window.n_cols - 1) or c[1] in (0, window.n_rows - 1)]
    best = None
    for c in sorted(candidates, key=window.index):
        if codes[c] == obstacle_code:
            continue
        d = float(np.linalg.norm(window.cell_center(c) - np.asarray(goal[:2], dtype=float)))
        if best is None or d < best[0] - 1e-12:
            best = (d, c)
    if best is None:
        raise NoCandidateError("every candidate waypoint cell is an obstacle")
    return best[1]


@dataclass
class ExecutionTrace:
    events: list = field(default_factory=list)
    timeline: list = field(default_factory=list)
    status: str = "running"
    path: list = field(default_factory=list)  # global cells visited
    frames: list = field(default_factory=list)  # (robot cell, feet, base path) snapshots for rendering
    library: StrategyLibrary | None = None

    def log(self, tag, **info):
        assert tag in TAGS, tag
        ev = {"seq": len(self.events), "tag": tag}
        ev.update(info)
        self.events.append(ev)
        return ev

    def count(self, tag) -> int:
        return sum(e["tag"] == tag for e in self.events)

    def lines(self):
        rows = [json.dumps(e, sort_keys=True) for e in self.events]
        rows += [json.dumps({"tag": "schedule", **s.to_dict()}, sort_keys=True) for s in self.timeline]
        rows.append(json.dumps({"tag": "summary", "status": self.status, "path": [list(c) for c in self.path]},
                               sort_keys=True))
        return rows

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())


def _r(x, nd=6):
    return [round(float(v), nd) for v in x]


class _Runner:
    def __init__(self, lib, scenario, goal, model, cfg, seed, deterministic, fail_transitions, polygons, window,
                 max_episodes):
        self.lib = lib
        self.sc = scenario
        self.grid = scenario.grid
        self.cat = lib.catalog
        self.model = model
        self.cfg = cfg
        self.seed = seed
        self.det = deterministic
        self.polys = list(polygons)
        self.size = window
        self.obstacle = self.cat.code(self.cat.obstacle) if self.cat.obstacle else -1
        self.codes = map_codes(self.polys, self.grid, self.cat, scenario.classifier)
        self.goal = np.asarray(goal[:2], dtype=float)
        uv = self.grid.to_grid(self.goal) / self.grid.cell_size
        self.goal_cell = (int(math.floor(uv[0])), int(math.floor(uv[1])))
        self.forced = {(tuple(a), tuple(b)) for a, b in fail_transitions}
        self.failed = []  # global (src, dst) pairs that failed online, in order
        self.oracle = OnlineOracle(self.polys, self.cat, model, cfg, deterministic)
        self.max_episodes = max_episodes or 4 * self.grid.n_cells
        self.trace = ExecutionTrace()
        self.segments = []
        self.base_path = []
        self.runtime_strats = {}
        self.repair_failures = {}

    # -- geometry --------------------------------------------------------------------------
    def near(self, cells):
        lo = np.min([self.grid.cell_box(c)[0] for c in cells], axis=0) - 0.05
        hi = np.max([self.grid.cell_box(c)[1] for c in cells], axis=0) + 0.05
        return polygons_near(self.polys, lo, hi)

    def ground(self, cell):
        pieces = polygons_by_cell(self.near([cell]), self.grid)
        return cell_height(pieces.get(cell, []))

    def target_pose(self, cell):
        p = standing_pose(self.grid, cell, self.ground(cell), self.model)
        out = retarget_pose(p, self.near([cell]), self.model, self.cfg, deterministic=self.det)
        if out is None:
            return p, None, 0.0
        q, feet = out
        return q, feet, float(np.linalg.norm(np.subtract(q.pos, p.pos)))

    # -- symbolic layer -----------------------------------------------------------------------
    def local_disallowed(self, wgrid, origin, skills):
        out = []
        for sk in skills:
            a = (sk.source[0] + origin[0], sk.source[1] + origin[1])
            b = (sk.target[0] + origin[0], sk.target[1] + origin[1])
            if (a, b) in self.failed:
                out.append((sk.source, sk.id))
        return sorted(out)

    def strategy_for(self, robot, wgrid, origin, state, request, ep):
        """(automaton, skills by id) for this window, synthesizing or repairing when needed."""
        pair = (state, tuple(request))
        skills = self.lib.skills_for(state, wgrid)
        dis = self.local_disallowed(wgrid, origin, skills)
        rec = self.lib.strategies.get(pair)
        if rec is not None and not dis:
            return rec["automaton"], {o.id: o for o in rec["skills"]}
        key = (pair, tuple(dis))
        if key in self.runtime_strats:
            return self.runtime_strats[key]
        info = {"episode": ep, "cell": list(robot), "terrain": terrain_hash(state), "request": list(request)}
        if rec is None and pair not in self.lib.coverage:
            self.trace.log("unseen_state", **info)
        log = []
        status, auto, red = synthesize_pair(self.lib, state, request, wgrid, self.oracle,
                                            self.seed + len(self.trace.events), repair_log=log, disallowed=dis,
                                            origin=RUNTIME)
        dis_out = [[list(c), s] for c, s in dis]
        if log:
            gaits = sorted({r["gait_id"] for r in log if "gait_id" in r})
            self.trace.log("runtime_repair", **info, status=status, suggestions=len(log),
                           new_skills=[r["skill"] for r in log if "skill" in r], gaits=gaits,
                           flight=[self.lib.gaits[g].has_flight(self.cfg.dt) for g in gaits], disallowed=dis_out)
        else:
            self.trace.log("resynthesis", **info, status=status, disallowed=dis_out)
        if auto is None:
            return None, {}
        out = (auto, {o.id: o for o in red.skills})
        if dis:
            self.runtime_strats[key] = out
        else:
            self.lib.strategies[pair] = {"automaton": auto, "skills": list(red.skills)}
            self.lib.coverage[pair] = status
        return out

    # -- motion layer ---------------------------------------------------------------------------
    def move(self, src, dst, skill, pose, feet, ep):
        """Online gait-fixed MICP for one skill; returns (ok, event info, new pose, new feet)."""
        info = {"episode": ep, "cell": list(src), "target": list(dst), "skill": skill.id, "gait": skill.gait_id}
        if (src, dst) in self.forced:
            return False, {**info, "verdict": "INFEASIBLE", "note": "forced failure", "lps": 0}, pose, feet
        final, _, shift = self.target_pose(dst)
        if shift > 1e-4:
            self.trace.log("retarget", **info, shift=round(shift, 6), pose=_r(final.pos))
        gait = self.lib.gaits[skill.gait_id]
        polys = self.near([src, dst])
        prob = build_gait_fixed(pose, final, polys, gait, self.model, self.cfg, init_feet=feet)
        res = solve(prob, "feasibility", self.cfg, deterministic=self.det)
        lps, nodes, secs = res.lps, res.nodes, res.seconds
        if not res.ok and feet is not None:
            # skills are certified from a free initial stance; allow the feet to be re-placed
            prob = build_gait_fixed(pose, final, polys, gait, self.model, self.cfg)
            res = solve(prob, "feasibility", self.cfg, deterministic=self.det)
            lps, nodes, secs = lps + res.lps, nodes + res.nodes, secs + res.seconds
            info["stance_reset"] = True
        info.update(verdict=res.status, nodes=nodes)
        if not res.ok:
            info["lps"] = lps
            if not self.det:
                info["seconds"] = round(secs, 4)
            return False, info, pose, feet
        sm = smooth(prob, res.x, self.cfg)
        lps += sm.lps
        traj = unpack(prob, sm.x)
        rep = check_solution(prob, traj)
        info.update(lps=lps, check="PASS" if rep.passed else "FAIL", duration=round(traj.duration, 6))
        if not self.det:
            info["seconds"] = round(secs + sm.seconds, 4)
        if not rep.passed:
            info["verdict"] = "CHECK_FAILED"
            return False, info, pose, feet
        info["pt"] = round(lps * LP_SECONDS, 6) if self.det else round(secs + sm.seconds, 6)
        info["tt"] = round(traj.duration, 6)
        self.base_path.extend(_r(r, 4) for r in traj.r[:, :2])
        new_pose = Pose(tuple(traj.r[-1]), tuple(traj.th[-1]))
        return True, info, new_pose, traj.p[-1].copy()

    # -- main loop ------------------------------------------------------------------------------
    def run(self):
        tr = self.trace
        robot = tuple(self.sc.start)
        pose, feet, _ = self.target_pose(robot)
        tr.path.append(robot)
        w, h = self.size
        centre = (w // 2, h // 2)
        for ep in range(self.max_episodes):
            if robot == self.goal_cell:
                tr.log("goal_reached", episode=ep, cell=list(robot))
                tr.status = "goal_reached"
                break
            origin = (robot[0] - centre[0], robot[1] - centre[1])
            wgrid = window_grid(self.grid, robot, self.size)
            state = window_state(self.codes, robot, self.size, self.obstacle)
            try:
                req = local_waypoint(self.goal, wgrid, state, self.obstacle, request_cells(self.size))
            except NoCandidateError:
                tr.log("stuck", episode=ep, cell=list(robot), reason="no waypoint candidate")
                tr.status = "stuck"
                break
            pair = (state, req)
            auto, skills = self.strategy_for(robot, wgrid, origin, state, req, ep)
            if auto is None or centre not in auto.initial:
                n = self.repair_failures[pair] = self.repair_failures.get(pair, 0) + 1
                if n >= MAX_FAILED_REPAIRS or auto is None:
                    tr.log("stuck", episode=ep, cell=list(robot), reason="unrealizable window",
                           terrain=terrain_hash(state), request=list(req))
                    tr.status = "stuck"
                    break
                continue
            self.repair_failures.pop(pair, None)
            local = centre
            node = auto.initial[centre]
            steps = 0
            while local != req:
                _, node = auto.step(node, local)
                sid = auto.nodes[node][1]
                if sid is None:
                    break
                steps += 1
                if steps > wgrid.n_cells:
                    tr.log("stuck", episode=ep, cell=list(robot), reason="episode exceeded window size")
                    tr.status = "stuck"
                    return self.finish()
                sk = skills[sid]
                dst_local = auto.targets[sid]
                src = (local[0] + origin[0], local[1] + origin[1])
                dst = (dst_local[0] + origin[0], dst_local[1] + origin[1])
                ok, info, pose2, feet2 = self.move(src, dst, sk, pose, feet, ep)
                if not ok:
                    tr.log("solve_failure", **info, disallowed=[list(local), sid])
                    if (src, dst) not in self.failed:
                        self.failed.append((src, dst))
                    break
                info["segment"] = len(self.segments)
                self.segments.append((info["pt"], info["tt"]))
                tr.log("advance", **info)
                pose, feet = pose2, feet2
                local = dst_local
                robot = dst
                tr.path.append(robot)
                tr.frames.append((robot, _r(feet.ravel(), 4), list(self.base_path)))
        else:
            tr.log("stuck", cell=list(robot), reason="episode limit")
            tr.status = "stuck"
        return self.finish()

    def finish(self):
        if self.trace.status == "running":
            self.trace.status = "stuck"
        self.trace.timeline = schedule(self.segments) if self.segments else []
        self.trace.library = self.lib
        return self.trace


def execute(library: StrategyLibrary, scenario: TerrainScenario, goal=None, model: RobotModel | None = None,
            cfg: MicpConfig = MicpConfig(), seed: int = 0, deterministic: bool = False, fail_transitions=(),
            polygons=None, window=None, max_episodes=None) -> ExecutionTrace:
    """Drive the robot from ``scenario.start`` to the world point ``goal``.

    ``polygons`` overrides the online terrain (default: the scenario's own);
    ``fail_transitions`` lists global (source cell, target cell) moves whose online
    solve is forced to fail. The library is copied, never modified.
    """
    from ..micp import GO2
    lib = copy.deepcopy(library)
    goal = scenario.goal if goal is None else goal
    window = window or (library.grid.n_cols, library.grid.n_rows)
    runner = _Runner(lib, scenario, goal, model or GO2, cfg, seed, deterministic, fail_transitions,
                     scenario.polygons if polygons is None else polygons, tuple(window), max_episodes)
    return runner.run()
