"""Assembly of the mixed-integer programs: variables, linear rows, indicator rows, cost."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..abstraction import TerrainPolygon
from ..errors import DimensionMismatchError, EmptyPolygonsError
from .config import MicpConfig
from .gaits import Gait, stance_runs
from .model import GRAVITY, RobotModel, euler_matrix
from .reference import Pose, Reference, reference_trajectory

NV = 66  # continuous variables per knot
FIELDS = {"r": 0, "rd": 3, "rdd": 6, "th": 9, "thd": 12, "thdd": 15}
FOOT_FIELDS = {"p": 0, "pd": 3, "pdd": 6, "f": 9}


@dataclass(frozen=True)
class Layout:
    """Knot-major layout of the continuous block; binaries follow it."""

    N: int
    dt: float

    @property
    def n_cont(self) -> int:
        return NV * self.N

    def idx(self, i: int, name: str, foot: int | None = None) -> np.ndarray:
        if foot is None:
            base = NV * i + FIELDS[name]
        else:
            base = NV * i + 18 + 12 * foot + FOOT_FIELDS[name]
        return np.arange(base, base + 3)

    def block(self, name: str, foot: int | None = None) -> np.ndarray:
        """(N, 3) index array of one field over all knots."""
        return np.stack([self.idx(i, name, foot) for i in range(self.N)])


class RowBuilder:
    """Accumulates sparse equality and inequality rows tagged by constraint family."""

    def __init__(self):
        self.eq = ([], [], [], [])  # rows, cols, vals, rhs
        self.ub = ([], [], [], [])
        self.eq_fam, self.ub_fam = [], []
        self.big_m = []

    def _add(self, store, fams, fam, cols, vals, rhs):
        r = len(store[3])
        store[0].extend([r] * len(cols))
        store[1].extend(int(c) for c in cols)
        store[2].extend(float(v) for v in vals)
        store[3].append(float(rhs))
        fams.append(fam)
        return r

    def add_eq(self, fam, cols, vals, rhs):
        return self._add(self.eq, self.eq_fam, fam, cols, vals, rhs)

    def add_ub(self, fam, cols, vals, rhs, big_m=0.0):
        self.big_m.append(float(big_m))
        return self._add(self.ub, self.ub_fam, fam, cols, vals, rhs)

    def matrices(self, n):
        def mk(store):
            m = len(store[3])
            A = sp.csr_matrix((store[2], (store[0], store[1])), shape=(m, n))
            A.sum_duplicates()
            return A, np.array(store[3], dtype=float)
        return mk(self.eq) + mk(self.ub)


@dataclass
class MicpProblem:
    kind: str  # gait_fixed | gait_free | retarget
    layout: Layout | None
    lb: np.ndarray
    ub: np.ndarray
    binaries: np.ndarray  # indices of binary variables
    bin_labels: list
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    eq_families: list
    ub_families: list
    big_m: np.ndarray  # per inequality row, 0 for plain rows
    groups: list  # (binary indices, "=" | "<=")
    P: sp.csr_matrix  # cost 0.5 x'Px + q'x + c0
    q: np.ndarray
    c0: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.lb)

    @property
    def n_binaries(self) -> int:
        return len(self.binaries)

    def free_binaries(self, lb=None, ub=None) -> np.ndarray:
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        b = self.binaries
        return b[lb[b] < ub[b]]

    def to_dict(self):
        def trip(A):
            A = A.tocoo()
            return {"shape": list(A.shape), "row": A.row.tolist(), "col": A.col.tolist(), "val": A.data.tolist()}
        return {
            "kind": self.kind,
            "layout": None if self.layout is None else {"N": self.layout.N, "dt": self.layout.dt, "per_knot": NV},
            "lb": self.lb.tolist(), "ub": self.ub.tolist(),
            "binaries": self.binaries.tolist(), "bin_labels": self.bin_labels,
            "A_eq": trip(self.A_eq), "b_eq": self.b_eq.tolist(),
            "A_ub": trip(self.A_ub), "b_ub": self.b_ub.tolist(),
            "eq_families": self.eq_families, "ub_families": self.ub_families,
            "big_m": self.big_m.tolist(),
            "groups": [[list(map(int, g)), s] for g, s in self.groups],
            "P": trip(self.P), "q": self.q.tolist(), "c0": self.c0,
            "meta": _jsonable(self.meta),
        }

    @classmethod
    def from_dict(cls, d):
        def mat(t):
            return sp.csr_matrix((t["val"], (t["row"], t["col"])), shape=tuple(t["shape"]))
        lay = d["layout"]
        return cls(d["kind"], None if lay is None else Layout(lay["N"], lay["dt"]),
                   np.array(d["lb"], float), np.array(d["ub"], float), np.array(d["binaries"], dtype=np.int64),
                   [tuple(x) if isinstance(x, list) else x for x in d["bin_labels"]],
                   mat(d["A_eq"]), np.array(d["b_eq"], float), mat(d["A_ub"]), np.array(d["b_ub"], float),
                   list(d["eq_families"]), list(d["ub_families"]), np.array(d["big_m"], float),
                   [(np.array(g, dtype=np.int64), s) for g, s in d["groups"]],
                   mat(d["P"]), np.array(d["q"], float), float(d["c0"]), d.get("meta", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return x


# -- helpers ------------------------------------------------------------------------------

def _row_max(cols, vals, lb, ub):
    vals = np.asarray(vals, dtype=float)
    cols = np.asarray(cols, dtype=np.int64)
    return float(np.sum(np.where(vals > 0, vals * ub[cols], vals * lb[cols])))


class _Builder:
    """Shared machinery: bounds, rows, binaries, big-M indicator expansion."""

    def __init__(self, n_cont: int):
        self.lb = np.full(n_cont, -np.inf)
        self.ub = np.full(n_cont, np.inf)
        self.rows = RowBuilder()
        self.bin_labels = []
        self.groups = []

    def new_binary(self, label) -> int:
        self.lb = np.append(self.lb, 0.0)
        self.ub = np.append(self.ub, 1.0)
        self.bin_labels.append(label)
        return len(self.lb) - 1

    def bound(self, idx, lo, hi):
        idx = np.atleast_1d(idx)
        self.lb[idx] = np.maximum(self.lb[idx], lo)
        self.ub[idx] = np.minimum(self.ub[idx], hi)

    def fix(self, idx, val):
        idx = np.atleast_1d(idx)
        self.lb[idx] = val
        self.ub[idx] = val

    def indicator_ub(self, fam, cols, vals, rhs, bins, active_when="one"):
        """Row a.x <= rhs enforced when sum(bins) == 1 ("one") or == 0 ("zero").

        The big-M constant is the row's maximal violation over the variable box.
        """
        m = _row_max(cols, vals, self.lb, self.ub) - rhs
        if m <= 1e-12:
            return None  # implied by the bounds
        m = m * (1 + 1e-9) + 1e-9
        cols, vals = list(cols), list(vals)
        if active_when == "one":
            return self.rows.add_ub(fam, cols + list(bins), vals + [m] * len(bins), rhs + m, m)
        return self.rows.add_ub(fam, cols + list(bins), vals + [-m] * len(bins), rhs, m)

    def indicator_eq(self, fam, cols, vals, rhs, bins, active_when="one"):
        self.indicator_ub(fam, cols, vals, rhs, bins, active_when)
        self.indicator_ub(fam, cols, [-v for v in vals], -rhs, bins, active_when)

    def group(self, bins, sense):
        bins = list(bins)
        self.groups.append((np.array(bins, dtype=np.int64), sense))
        if sense == "=":
            self.rows.add_eq("group", bins, [1.0] * len(bins), 1.0)
        else:
            self.rows.add_ub("group", bins, [1.0] * len(bins), 1.0)

    def finish(self, kind, layout, P, q, c0, meta):
        A_eq, b_eq, A_ub, b_ub = self.rows.matrices(len(self.lb))
        return MicpProblem(kind, layout, self.lb, self.ub, np.array(
            [i for i in range(len(self.lb)) if i >= (layout.n_cont if layout else meta["n_cont"])], dtype=np.int64),
            self.bin_labels, A_eq, b_eq, A_ub, b_ub, self.rows.eq_fam, self.rows.ub_fam,
            np.array(self.rows.big_m), self.groups, P, q, c0, meta)


def friction_directions(normal, mu, facets=4):
    """Facet normals d_k and slopes so that d_k.f <= slope * n.f is an inner pyramid of the cone."""
    n = np.asarray(normal, dtype=float)
    t1 = np.cross(n, [0.0, 1.0, 0.0]) if abs(n[0]) < 0.9 else np.cross(n, [0.0, 0.0, 1.0])
    t1 = t1 / np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    out = []
    for k in range(facets):
        a = 2 * math.pi * k / facets
        out.append(math.cos(a) * t1 + math.sin(a) * t2)
    return np.array(out), mu * math.cos(math.pi / facets)


def _workspace(polys, poses, margin):
    pts = [p.points for p in polys] + [np.array([ps.pos]) for ps in poses]
    allp = np.vstack(pts)
    lo = allp.min(axis=0) - margin
    hi = allp.max(axis=0) + margin
    return lo, hi


def _reach_box(model: RobotModel, th_ref, j):
    """Axis-aligned world-frame bounds of the kinematic box of foot j relative to the base."""
    R = euler_matrix(th_ref)
    c = R @ model.foot_offsets()[j]
    h = np.abs(R) @ np.asarray(model.p_max)
    return c - h, c + h


def _base_boxes(init: Pose, final: Pose, N, dt, v_max):
    """Per-knot xy box reachable by the base given its speed bound and both endpoints."""
    p0, p1 = np.array(init.pos[:2]), np.array(final.pos[:2])
    t = np.arange(N) * dt
    T = t[-1]
    lo = np.maximum(p0 - v_max * t[:, None], p1 - v_max * (T - t)[:, None])
    hi = np.minimum(p0 + v_max * t[:, None], p1 + v_max * (T - t)[:, None])
    return lo, hi


def _foot_boxes(model, ref: Reference, base_lo, base_hi, j, knots):
    """xy box a stationary foot must lie in to be reachable at every knot of ``knots``."""
    lo, hi = np.full(2, -np.inf), np.full(2, np.inf)
    for i in knots:
        rlo, rhi = _reach_box(model, ref.theta[i], j)
        lo = np.maximum(lo, base_lo[i] + rlo[:2])
        hi = np.minimum(hi, base_hi[i] + rhi[:2])
    return lo, hi


def _poly_hits_box(poly: TerrainPolygon, lo, hi):
    if np.any(lo > hi + 1e-9):
        return False
    xy = poly.xy
    if np.any(xy.min(axis=0) > hi + 1e-9) or np.any(xy.max(axis=0) < lo - 1e-9):
        return False
    # separating axis test with the polygon edges
    A, b = poly.halfspaces()
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    return not np.any(np.min(corners @ A.T, axis=0) > b + 1e-9)


def _validate(init, final, polygons):
    for ps in (init, final):
        if len(ps.pos) != 3 or len(ps.rpy) != 3:
            raise DimensionMismatchError("poses must be 6-dimensional")
    if not polygons:
        raise EmptyPolygonsError("no foothold polygons given")


# -- continuous core shared by gait-fixed and gait-free -------------------------------------------

def _continuous_core(b: _Builder, lay: Layout, model: RobotModel, cfg: MicpConfig, ref: Reference,
                     init: Pose, final: Pose, ws_lo, ws_hi, init_feet=None):
    N, dt = lay.N, lay.dt
    m = model.mass
    tau_b = np.asarray(model.tau_base) / np.asarray(model.inertia)
    fmax = cfg.f_max
    for i in range(N):
        b.bound(lay.idx(i, "r"), ws_lo, ws_hi)
        b.bound(lay.idx(i, "rd"), -cfg.v_max, cfg.v_max)
        b.bound(lay.idx(i, "rdd"), -cfg.a_max, cfg.a_max)
        b.bound(lay.idx(i, "th"), ref.theta[i] - math.pi / 2, ref.theta[i] + math.pi / 2)
        b.bound(lay.idx(i, "thd"), -cfg.ang_v_max, cfg.ang_v_max)
        b.bound(lay.idx(i, "thdd"), -tau_b, tau_b)
        for j in range(4):
            b.bound(lay.idx(i, "p", j), ws_lo, ws_hi)
            b.bound(lay.idx(i, "pd", j), -cfg.foot_v_max, cfg.foot_v_max)
            b.bound(lay.idx(i, "pdd", j), -cfg.foot_a_max, cfg.foot_a_max)
            b.bound(lay.idx(i, "f", j), -fmax, fmax)
    # boundary conditions: static poses at both ends
    for i, ps in ((0, init), (N - 1, final)):
        b.fix(lay.idx(i, "r"), np.array(ps.pos))
        b.fix(lay.idx(i, "th"), np.array(ps.rpy))
        b.fix(lay.idx(i, "rd"), 0.0)
        b.fix(lay.idx(i, "thd"), 0.0)
        for j in range(4):
            b.fix(lay.idx(i, "pd", j), 0.0)
    # backward Euler leaves knot-0 accelerations free; a static start means they vanish
    b.fix(lay.idx(0, "rdd"), 0.0)
    b.fix(lay.idx(0, "thdd"), 0.0)
    for j in range(4):
        b.fix(lay.idx(0, "pdd", j), 0.0)
    if init_feet is not None:
        for j in range(4):
            b.fix(lay.idx(0, "p", j), np.asarray(init_feet[j], dtype=float))
    rows = b.rows
    # backward Euler integration
    pairs = [("r", "rd", None), ("rd", "rdd", None), ("th", "thd", None), ("thd", "thdd", None)]
    pairs += [(a, c, j) for j in range(4) for a, c in (("p", "pd"), ("pd", "pdd"))]
    for i in range(N - 1):
        for x, xd, j in pairs:
            a0, a1, d1 = lay.idx(i, x, j), lay.idx(i + 1, x, j), lay.idx(i + 1, xd, j)
            for k in range(3):
                rows.add_eq("integration", [a1[k], a0[k], d1[k]], [1.0, -1.0, -dt], 0.0)
    # translational dynamics: m rdd = sum f + m g
    for i in range(N):
        rdd = lay.idx(i, "rdd")
        fs = [lay.idx(i, "f", j) for j in range(4)]
        for k in range(3):
            rows.add_eq("dynamics", [rdd[k]] + [f[k] for f in fs], [m] + [-1.0] * 4, m * GRAVITY[k])
    # actuation: fixed-Jacobian joint torque limits, two-sided
    tau = np.asarray(model.tau_max)
    Js = [model.jacobian(j) for j in range(4)]
    for i in range(N):
        Rt = euler_matrix(ref.theta[i]).T
        for j in range(4):
            f = lay.idx(i, "f", j)
            G = Js[j].T @ Rt
            for k in range(3):
                if np.abs(G[k]).sum() * fmax <= tau[k]:
                    continue
                rows.add_ub("torque", f, G[k], tau[k])
                rows.add_ub("torque", f, -G[k], tau[k])
    # kinematics box around the nominal foot, oriented by the reference attitude
    offs = model.foot_offsets()
    pmax = np.asarray(model.p_max)
    for i in range(N):
        Rt = euler_matrix(ref.theta[i]).T
        r = lay.idx(i, "r")
        for j in range(4):
            p = lay.idx(i, "p", j)
            for k in range(3):
                cols = list(p) + list(r)
                vals = list(Rt[k]) + list(-Rt[k])
                rows.add_ub("kinematics", cols, vals, offs[j, k] + pmax[k])
                rows.add_ub("kinematics", cols, [-v for v in vals], -(offs[j, k] - pmax[k]))


def _region_rows(b: _Builder, fam, p_idx, poly: TerrainPolygon, bins, active_when="one", plain=False):
    A, rhs = poly.halfspaces()
    n = np.asarray(poly.normal)
    for a, c in zip(A, rhs):
        cols, vals = [p_idx[0], p_idx[1]], [a[0], a[1]]
        if plain:
            b.rows.add_ub(fam, cols, vals, c)
        else:
            b.indicator_ub(fam, cols, vals, c, bins, active_when)
    if plain:
        b.rows.add_eq(fam + "_plane", list(p_idx), list(n), poly.offset)
    else:
        b.indicator_eq(fam + "_plane", list(p_idx), list(n), poly.offset, bins, active_when)


def _friction_rows(b: _Builder, f_idx, poly: TerrainPolygon, facets, bins, plain=False, mu=None):
    mu = poly.friction if mu is None else mu
    D, slope = friction_directions(poly.normal, mu, facets)
    n = np.asarray(poly.normal)
    rows = [(d - slope * n) for d in D] + [-n]
    for v in rows:
        if plain:
            b.rows.add_ub("friction", list(f_idx), list(v), 0.0)
        else:
            b.indicator_ub("friction", list(f_idx), list(v), 0.0, bins)


def _same_cone(polys):
    key = {(tuple(np.round(p.normal, 12)), round(p.friction, 12)) for p in polys}
    return len(key) == 1


def _cost(lay: Layout, cfg: MicpConfig, ref: Reference, n_total: int):
    diag = np.zeros(n_total)
    q = np.zeros(n_total)
    c0 = 0.0

    def track(idx, target, w):
        nonlocal c0
        diag[idx] += 2 * w
        q[idx] += -2 * w * target
        c0 += float(w * np.sum(target ** 2))

    for i in range(lay.N):
        track(lay.idx(i, "r"), ref.r[i], cfg.w_pos)
        track(lay.idx(i, "th"), ref.theta[i], cfg.w_ori)
        diag[lay.idx(i, "rdd")] += 2 * cfg.w_acc
        diag[lay.idx(i, "thdd")] += 2 * cfg.w_ang_acc
        for j in range(4):
            track(lay.idx(i, "p", j), ref.feet[i, j], cfg.w_foot)
            diag[lay.idx(i, "pdd", j)] += 2 * cfg.w_foot_acc
            diag[lay.idx(i, "f", j)] += 2 * cfg.w_force
    return sp.diags(diag).tocsr(), q, c0


def _candidate_polys(model, ref, base_lo, base_hi, j, knots, polygons):
    lo, hi = _foot_boxes(model, ref, base_lo, base_hi, j, knots)
    return [r for r, poly in enumerate(polygons) if _poly_hits_box(poly, lo, hi)]


# -- public builders ---------------------------------------------------------------------------

def build_gait_fixed(init: Pose, final: Pose, polygons, gait: Gait, model: RobotModel,
                     cfg: MicpConfig = MicpConfig(), init_feet=None, ref: Reference | None = None) -> MicpProblem:
    """Gait-fixed program: binaries select one polygon per stance run of each foot."""
    _validate(init, final, polygons)
    polygons = list(polygons)
    N = gait.n_knots(cfg.dt)
    lay = Layout(N, cfg.dt)
    if ref is None:
        ref = reference_trajectory(init, final, N, cfg.dt, model, cfg.pitch_keyframe_dz)
    elif len(ref.r) != N:
        raise DimensionMismatchError("reference length does not match the gait horizon")
    ws_lo, ws_hi = _workspace(polygons, [init, final], cfg.workspace_margin)
    b = _Builder(lay.n_cont)
    _continuous_core(b, lay, model, cfg, ref, init, final, ws_lo, ws_hi, init_feet)
    contact = gait.contact_matrix(cfg.dt)
    runs = stance_runs(contact)
    base_lo, base_hi = _base_boxes(init, final, N, cfg.dt, cfg.v_max)
    steps = []  # (foot, run index, first knot, last knot, binary indices, candidate polygon ids)
    for j in range(4):
        for i in range(N):
            if contact[i, j]:
                b.fix(lay.idx(i, "pd", j), 0.0)
            else:
                b.fix(lay.idx(i, "f", j), 0.0)
        for k, (i0, i1) in enumerate(runs[j]):
            cand = _candidate_polys(model, ref, base_lo, base_hi, j, range(i0, i1 + 1), polygons)
            bins = []
            for r in range(len(polygons)):
                h = b.new_binary(("region", r, k, j))
                bins.append(h)
                if r not in cand:
                    b.fix(h, 0.0)
            b.group(bins, "=")
            steps.append((j, k, i0, i1, bins, cand))
            p0 = lay.idx(i0, "p", j)
            single = len(cand) == 1
            for r in cand:
                _region_rows(b, "region", p0, polygons[r], [bins[r]], plain=single)
            if single:
                b.fix(bins[cand[0]], 1.0)
            cone_plain = len(cand) >= 1 and _same_cone([polygons[r] for r in cand])
            for i in range(i0, i1 + 1):
                f = lay.idx(i, "f", j)
                if cone_plain:
                    _friction_rows(b, f, polygons[cand[0]], cfg.friction_facets, None, plain=True)
                else:
                    for r in cand:
                        _friction_rows(b, f, polygons[r], cfg.friction_facets, [bins[r]])
                b.rows.add_ub("force_cap", list(f), list(polygons[cand[0]].normal if cand else (0, 0, 1)), cfg.f_max)
    n_total = len(b.lb)
    P, q, c0 = _cost(lay, cfg, ref, n_total)
    meta = {"model": model.name, "config": cfg.to_dict(), "gait": gait.to_dict(), "N": N, "dt": cfg.dt,
            "polygons": [p.to_dict() for p in polygons], "init": init.to_list(), "final": final.to_list(),
            "contact": contact.astype(int).tolist(),
            "steps": [{"foot": j, "run": k, "first": i0, "last": i1, "bins": bins, "candidates": cand}
                      for j, k, i0, i1, bins, cand in steps],
            "reference": {"r": ref.r.tolist(), "theta": ref.theta.tolist(), "feet": ref.feet.tolist()},
            "init_feet": None if init_feet is None else np.asarray(init_feet).tolist()}
    return b.finish("gait_fixed", lay, P, q, c0, meta)


def binary_step_knots(N: int, dt: float, dt_m: float, M: int) -> list:
    """Knots of each binary interval [m dt_m, (m+1) dt_m); the last interval also owns t = T."""
    per = int(round(dt_m / dt))
    out = [list(range(m * per, (m + 1) * per)) for m in range(M)]
    out[-1].append(N - 1) if out[-1][-1] != N - 1 else None
    return out


def build_gait_free(init: Pose, final: Pose, polygons, model: RobotModel, cfg: MicpConfig = MicpConfig(),
                    init_feet=None, ref: Reference | None = None, pin_ends: bool = True) -> MicpProblem:
    """Gait-free program: binaries choose both contact state and polygon per binary step."""
    _validate(init, final, polygons)
    polygons = list(polygons)
    T = cfg.M * cfg.dt_m
    N = int(round(T / cfg.dt)) + 1
    lay = Layout(N, cfg.dt)
    if ref is None:
        ref = reference_trajectory(init, final, N, cfg.dt, model, cfg.pitch_keyframe_dz)
    ws_lo, ws_hi = _workspace(polygons, [init, final], cfg.workspace_margin)
    b = _Builder(lay.n_cont)
    _continuous_core(b, lay, model, cfg, ref, init, final, ws_lo, ws_hi, init_feet)
    base_lo, base_hi = _base_boxes(init, final, N, cfg.dt, cfg.v_max)
    knots = binary_step_knots(N, cfg.dt, cfg.dt_m, cfg.M)
    steps = []
    for j in range(4):
        for m, ks in enumerate(knots):
            cand = _candidate_polys(model, ref, base_lo, base_hi, j, ks, polygons)
            bins = []
            for r in range(len(polygons)):
                h = b.new_binary(("contact", r, m, j))
                bins.append(h)
                if r not in cand:
                    b.fix(h, 0.0)
            pinned = pin_ends and m in (0, cfg.M - 1)
            b.group(bins, "=" if pinned else "<=")
            steps.append((j, m, ks, bins, cand))
            if not cand:
                for i in ks:
                    b.fix(lay.idx(i, "f", j), 0.0)
                continue
            live = [bins[r] for r in cand]
            for i in ks:
                p, pd, f = lay.idx(i, "p", j), lay.idx(i, "pd", j), lay.idx(i, "f", j)
                for r in cand:
                    _region_rows(b, "region", p, polygons[r], [bins[r]])
                    _friction_rows(b, f, polygons[r], cfg.friction_facets, [bins[r]])
                for k in range(3):
                    # stance => foot still; swing => no force
                    b.indicator_ub("contact_velocity", [pd[k]], [1.0], 0.0, live, "one")
                    b.indicator_ub("contact_velocity", [pd[k]], [-1.0], 0.0, live, "one")
                    b.indicator_ub("contact_force", [f[k]], [1.0], 0.0, live, "zero")
                    b.indicator_ub("contact_force", [f[k]], [-1.0], 0.0, live, "zero")
    n_total = len(b.lb)
    P, q, c0 = _cost(lay, cfg, ref, n_total)
    meta = {"model": model.name, "config": cfg.to_dict(), "N": N, "dt": cfg.dt, "M": cfg.M, "dt_m": cfg.dt_m,
            "polygons": [p.to_dict() for p in polygons], "init": init.to_list(), "final": final.to_list(),
            "steps": [{"foot": j, "m": m, "knots": ks, "bins": bins, "candidates": cand}
                      for j, m, ks, bins, cand in steps],
            "reference": {"r": ref.r.tolist(), "theta": ref.theta.tolist(), "feet": ref.feet.tolist()},
            "init_feet": None if init_feet is None else np.asarray(init_feet).tolist()}
    return b.finish("gait_free", lay, P, q, c0, meta)


def add_collision_constraints(problem: MicpProblem, free_regions, cfg: MicpConfig | None = None,
                              h_swing: float | None = None) -> MicpProblem:
    """Confine every foot to one convex free region per collision step and lift swing feet.

    ``free_regions`` is a list of (A, b) with A of shape (k, 3) acting on the foot position.
    Swing clearance applies to gait-fixed problems: the swing midpoint must be ``h_swing``
    above both the lift-off and touch-down heights.
    """
    cfg = cfg or MicpConfig.from_dict(problem.meta.get("config", {}))
    h_swing = cfg.h_swing if h_swing is None else h_swing
    lay = problem.layout
    N = lay.N
    b = _Builder(0)
    b.lb, b.ub = problem.lb.copy(), problem.ub.copy()
    b.bin_labels = list(problem.bin_labels)
    b.groups = list(problem.groups)
    # start from the existing rows
    rb = b.rows
    for A, rhs, fams, store, big in ((problem.A_eq, problem.b_eq, problem.eq_families, "eq", None),
                                     (problem.A_ub, problem.b_ub, problem.ub_families, "ub", problem.big_m)):
        A = A.tocsr()
        for r in range(A.shape[0]):
            s, e = A.indptr[r], A.indptr[r + 1]
            if store == "eq":
                rb.add_eq(fams[r], A.indices[s:e], A.data[s:e], rhs[r])
            else:
                rb.add_ub(fams[r], A.indices[s:e], A.data[s:e], rhs[r], big[r])
    if free_regions:
        W = cfg.W if cfg.W > 0 else 1
        T = (N - 1) * lay.dt
        per = T / W
        for j in range(4):
            for w in range(W):
                ks = [i for i in range(N) if w * per - 1e-9 <= i * lay.dt < (w + 1) * per - 1e-9 or
                      (w == W - 1 and i == N - 1)]
                bins = [b.new_binary(("collision", s, w, j)) for s in range(len(free_regions))]
                b.group(bins, "=")
                for s, (A, rhs) in enumerate(free_regions):
                    A = np.atleast_2d(np.asarray(A, dtype=float))
                    for i in ks:
                        p = lay.idx(i, "p", j)
                        for a, c in zip(A, np.atleast_1d(rhs)):
                            b.indicator_ub("collision", list(p), list(a), float(c), [bins[s]])
    if h_swing and h_swing > 0 and problem.kind == "gait_fixed":
        contact = np.array(problem.meta["contact"], dtype=bool)
        for j, runs in enumerate(stance_runs(contact)):
            for (a0, a1), (c0, _c1) in zip(runs, runs[1:]):
                mid = (a1 + c0) // 2
                if mid <= a1:
                    continue
                pz = lay.idx(mid, "p", j)[2]
                for ref_k in (a1, c0):
                    rb.add_ub("clearance", [lay.idx(ref_k, "p", j)[2], pz], [1.0, -1.0], -h_swing)
    n_total = len(b.lb)
    P = sp.block_diag([problem.P, sp.csr_matrix((n_total - problem.n, n_total - problem.n))]).tocsr()
    q = np.concatenate([problem.q, np.zeros(n_total - problem.n)])
    meta = dict(problem.meta)
    meta["free_regions"] = [[np.atleast_2d(A).tolist(), np.atleast_1d(c).tolist()] for A, c in free_regions]
    meta["h_swing"] = h_swing
    return b.finish(problem.kind, lay, P, q, problem.c0, meta)
