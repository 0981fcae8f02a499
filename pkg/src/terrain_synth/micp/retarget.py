"""One-step kinematic feasibility: move a goal pose so every foot finds a foothold."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import EmptyPolygonsError
from .bnb import solve
from .config import MicpConfig
from .model import RobotModel, euler_matrix
from .problem import _Builder, _poly_hits_box, _region_rows
from .reference import Pose

SUPPORT_MARGIN = 0.02
FOOT_WEIGHT = 0.3


def build_retarget(pose: Pose, polygons, model: RobotModel, cfg: MicpConfig = MicpConfig(),
                   threshold: float | None = None):
    """Static stance at one instant: base position r (3) and feet p_j (4 x 3), attitude fixed."""
    if not polygons:
        raise EmptyPolygonsError("no foothold polygons given")
    thr = cfg.retarget_threshold if threshold is None else threshold
    polygons = list(polygons)
    b = _Builder(15)
    r = np.arange(3)
    feet = [np.arange(3 + 3 * j, 6 + 3 * j) for j in range(4)]
    c = np.array(pose.pos)
    b.bound(r, c - thr, c + thr)
    R = euler_matrix(pose.rpy)
    offs = model.foot_offsets()
    pmax = np.asarray(model.p_max)
    reach = np.abs(R) @ pmax
    for j in range(4):
        centre = c + R @ offs[j]
        b.bound(feet[j], centre - thr - reach - 1e-6, centre + thr + reach + 1e-6)
    Rt = R.T
    for j in range(4):
        for k in range(3):
            cols = list(feet[j]) + list(r)
            vals = list(Rt[k]) + list(-Rt[k])
            b.rows.add_ub("kinematics", cols, vals, offs[j, k] + pmax[k])
            b.rows.add_ub("kinematics", cols, [-v for v in vals], -(offs[j, k] - pmax[k]))
        # the base lies inside the support polygon if each foot stays in its own quadrant
        sx, sy = np.sign(offs[j, 0]), np.sign(offs[j, 1])
        for k, s in ((0, sx), (1, sy)):
            cols = list(feet[j]) + list(r)
            vals = list(-s * Rt[k]) + list(s * Rt[k])
            b.rows.add_ub("support", cols, vals, -SUPPORT_MARGIN)
    for j in range(4):
        lo, hi = b.lb[feet[j]][:2], b.ub[feet[j]][:2]
        bins = []
        for k, poly in enumerate(polygons):
            h = b.new_binary(("foothold", k, 0, j))
            bins.append(h)
            if not _poly_hits_box(poly, lo, hi):
                b.fix(h, 0.0)
                continue
            _region_rows(b, "region", feet[j], poly, [h])
        b.group(bins, "=")
    # distance of the base to the requested pose, plus a light pull of each foot to its
    # nominal spot under the moved base
    n = len(b.lb)
    D = sp.lil_matrix((3 + 12, n))
    d0 = np.zeros(15)
    for k in range(3):
        D[k, r[k]] = 1.0
        d0[k] = -c[k]
    nominal = R @ offs.T  # 3 x 4
    for j in range(4):
        for k in range(3):
            row = 3 + 3 * j + k
            D[row, feet[j][k]] = FOOT_WEIGHT
            D[row, r[k]] = -FOOT_WEIGHT
            d0[row] = -FOOT_WEIGHT * nominal[k, j]
    D = D.tocsr()
    P = (2.0 * D.T @ D).tocsr()
    q = 2.0 * D.T @ d0
    meta = {"n_cont": 15, "pose": pose.to_list(), "threshold": thr, "model": model.name,
            "polygons": [p.to_dict() for p in polygons]}
    return b.finish("retarget", None, P, q, float(d0 @ d0), meta)


def retarget_pose(pose: Pose, polygons, model: RobotModel, cfg: MicpConfig = MicpConfig(),
                  threshold: float | None = None, deterministic: bool = False):
    """Closest pose within ``threshold`` (per axis) admitting a static four-foot stance.

    Returns (Pose, feet (4, 3)) or None when no such pose exists.
    """
    prob = build_retarget(pose, polygons, model, cfg, threshold)
    res = solve(prob, "optimize", cfg, deterministic=deterministic)
    if not res.ok:
        return None
    x = res.x
    new = Pose(tuple(x[:3].tolist()), pose.rpy)
    return new, x[3:15].reshape(4, 3)
