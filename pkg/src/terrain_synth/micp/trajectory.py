"""Solutions unpacked into time series, and gait extraction from gait-free solutions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gaits import Gait, gait_from_contact


@dataclass
class Trajectory:
    t: np.ndarray
    r: np.ndarray
    rd: np.ndarray
    rdd: np.ndarray
    th: np.ndarray
    thd: np.ndarray
    thdd: np.ndarray
    p: np.ndarray  # (N, 4, 3)
    pd: np.ndarray
    pdd: np.ndarray
    f: np.ndarray
    contact: np.ndarray  # (N, 4) bool
    regions: list  # per step: {"foot", "step", "polygon"}
    objective: float | None = None
    stats: dict = field(default_factory=dict)
    x: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def has_flight(self) -> bool:
        return bool((~self.contact.any(axis=1)).any())

    def final_feet(self) -> np.ndarray:
        return self.p[-1].copy()

    def to_dict(self):
        d = {k: getattr(self, k).tolist() for k in ("t", "r", "rd", "rdd", "th", "thd", "thdd", "p", "pd", "pdd", "f")}
        d["contact"] = self.contact.astype(int).tolist()
        d["regions"] = self.regions
        d["objective"] = self.objective
        d["stats"] = self.stats
        return d

    @classmethod
    def from_dict(cls, d):
        arr = {k: np.array(d[k], dtype=float) for k in ("t", "r", "rd", "rdd", "th", "thd", "thdd", "p", "pd", "pdd", "f")}
        return cls(**arr, contact=np.array(d["contact"], dtype=bool), regions=d["regions"],
                   objective=d.get("objective"), stats=d.get("stats", {}))

    def dumps(self, ndigits: int | None = None) -> str:
        d = self.to_dict()
        if ndigits is not None:
            d = _round(d, ndigits)
        return json.dumps(d, sort_keys=True)


def _round(x, nd):
    if isinstance(x, float):
        return round(x, nd) + 0.0
    if isinstance(x, list):
        return [_round(v, nd) for v in x]
    if isinstance(x, dict):
        return {k: _round(v, nd) for k, v in x.items()}
    return x


def unpack(problem, x, objective=None, stats=None) -> Trajectory:
    lay = problem.layout
    N = lay.N
    get = lambda name, j=None: x[lay.block(name, j)]  # noqa: E731
    feet = lambda name: np.stack([get(name, j) for j in range(4)], axis=1)  # noqa: E731
    regions = []
    if problem.kind == "gait_fixed":
        contact = np.array(problem.meta["contact"], dtype=bool)
        for st in problem.meta["steps"]:
            vals = x[np.array(st["bins"])]
            regions.append({"foot": st["foot"], "step": st["run"], "polygon": int(np.argmax(vals)),
                            "first": st["first"]})
    else:
        contact = np.zeros((N, 4), dtype=bool)
        for st in problem.meta["steps"]:
            vals = x[np.array(st["bins"])]
            on = vals.sum() > 0.5
            if on:
                regions.append({"foot": st["foot"], "step": st["m"], "polygon": int(np.argmax(vals))})
            for i in st["knots"]:
                contact[i, st["foot"]] = on
    return Trajectory(np.arange(N) * lay.dt, get("r"), get("rd"), get("rdd"), get("th"), get("thd"), get("thdd"),
                      feet("p"), feet("pd"), feet("pdd"), feet("f"), contact, regions, objective, stats or {},
                      np.asarray(x).copy())


def extract_gait(traj: Trajectory, gid: str = "gait_free") -> Gait:
    """Stance intervals read off the contact table, contiguous runs merged."""
    dt = float(traj.t[1] - traj.t[0]) if traj.N > 1 else 1.0
    return gait_from_contact(traj.contact, dt, gid)
