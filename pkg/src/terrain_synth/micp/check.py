"""Independent verification of a trajectory against every constraint family.

The checks recompute each family from the trajectory arrays and the problem metadata
rather than from the assembled matrices, plus a generic residual over all rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..abstraction import TerrainPolygon
from .backends import max_violation
from .config import MicpConfig
from .gaits import stance_runs
from .model import GRAVITY, euler_matrix, get_model
from .problem import friction_directions
from .reference import Pose


@dataclass
class CheckReport:
    residuals: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    def failures(self):
        return {k: v for k, v in self.residuals.items() if v > self.tol}

    def __str__(self):
        lines = [f"{'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})"]
        lines += [f"  {k:<18} {v:.3e}" for k, v in sorted(self.residuals.items())]
        return "\n".join(lines)


def _in_polygon(poly: TerrainPolygon, p):
    A, b = poly.halfspaces()
    return max(float(np.max(A @ p[:2] - b)), abs(float(np.dot(poly.normal, p) - poly.offset)))


def check_solution(problem, traj, tol: float = 1e-6) -> CheckReport:
    meta = problem.meta
    if problem.layout is not None and traj.N != problem.layout.N:
        raise ValueError("trajectory length does not match the problem")
    res = {}
    if traj.x is not None:
        res["rows"] = max_violation(problem, traj.x)
        b = traj.x[problem.binaries]
        res["integrality"] = float(np.max(np.abs(b - np.round(b)), initial=0.0))
        for g, sense in problem.groups:
            s = float(np.round(traj.x[g]).sum())
            v = abs(s - 1) if sense == "=" else max(0.0, s - 1)
            res["groups"] = max(res.get("groups", 0.0), v)
    if problem.kind not in ("gait_fixed", "gait_free"):
        return CheckReport(res, tol)
    model = get_model(meta["model"])
    cfg = MicpConfig.from_dict(meta["config"])
    polys = [TerrainPolygon.from_dict(d) for d in meta["polygons"]]
    dt = traj.t[1] - traj.t[0]
    N = traj.N
    m = model.mass
    # dynamics and integration
    dyn = m * traj.rdd - traj.f.sum(axis=1) - m * GRAVITY
    res["dynamics"] = float(np.max(np.abs(dyn)))
    integ = 0.0
    for x, xd in ((traj.r, traj.rd), (traj.rd, traj.rdd), (traj.th, traj.thd), (traj.thd, traj.thdd),
                  (traj.p, traj.pd), (traj.pd, traj.pdd)):
        integ = max(integ, float(np.max(np.abs(x[1:] - x[:-1] - dt * xd[1:]))))
    res["integration"] = integ
    # boundary conditions
    init, final = Pose.from_list(meta["init"]), Pose.from_list(meta["final"])
    bc = max(np.max(np.abs(traj.r[0] - init.pos)), np.max(np.abs(traj.r[-1] - final.pos)),
             np.max(np.abs(traj.th[0] - init.rpy)), np.max(np.abs(traj.th[-1] - final.rpy)),
             np.max(np.abs(traj.rd[[0, -1]])), np.max(np.abs(traj.thd[[0, -1]])))
    res["boundary"] = float(bc)
    # contact: stance feet still, swing feet unloaded
    c = traj.contact
    res["contact_velocity"] = float(np.max(np.abs(traj.pd[c]), initial=0.0))
    res["contact_force"] = float(np.max(np.abs(traj.f[~c]), initial=0.0))
    # friction and region of the selected polygons
    fr, rg = 0.0, 0.0
    runs = stance_runs(c)
    for j in range(4):
        for i0, i1 in runs[j]:
            p = traj.p[i0, j]
            # polygon chosen for this stance run: any polygon containing the foot
            errs = [_in_polygon(poly, p) for poly in polys]
            r = int(np.argmin(errs))
            rg = max(rg, errs[r])
            poly = polys[r]
            D, slope = friction_directions(poly.normal, poly.friction, cfg.friction_facets)
            n = np.asarray(poly.normal)
            for i in range(i0, i1 + 1):
                f = traj.f[i, j]
                fn = f @ n
                fr = max(fr, -fn, float(np.max(D @ f - slope * fn)))
                rg = max(rg, float(np.max(np.abs(traj.p[i, j] - p))))
    res["friction"] = fr
    res["region"] = rg
    # actuation
    ref_th = np.array(meta["reference"]["theta"])
    tq = 0.0
    Js = [model.jacobian(j) for j in range(4)]
    for i in range(N):
        Rt = euler_matrix(ref_th[i]).T
        for j in range(4):
            tq = max(tq, float(np.max(np.abs(Js[j].T @ Rt @ traj.f[i, j]) - np.asarray(model.tau_max))))
    res["torque"] = max(tq, 0.0)
    ang = np.asarray(model.inertia) * np.abs(traj.thdd) - np.asarray(model.tau_base)
    res["base_torque"] = max(float(np.max(ang)), 0.0)
    # kinematics box
    offs = model.foot_offsets()
    pmax = np.asarray(model.p_max)
    kin = 0.0
    for i in range(N):
        Rt = euler_matrix(ref_th[i]).T
        for j in range(4):
            d = Rt @ (traj.p[i, j] - traj.r[i]) - offs[j]
            kin = max(kin, float(np.max(np.abs(d) - pmax)))
    res["kinematics"] = max(kin, 0.0)
    if problem.meta.get("init_feet") is not None:
        res["boundary"] = max(res["boundary"], float(np.max(np.abs(traj.p[0] - np.array(meta["init_feet"])))))
    return CheckReport(res, tol)
