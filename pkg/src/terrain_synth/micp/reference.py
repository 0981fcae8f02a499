"""Base poses and interpolated reference trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import RobotModel, euler_matrix


@dataclass(frozen=True)
class Pose:
    """Base position (x, y, z) and ZYX Euler angles stored as (roll, pitch, yaw)."""

    pos: tuple
    rpy: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        vals = tuple(self.pos) + tuple(self.rpy)
        if len(vals) != 6 or not all(math.isfinite(v) for v in vals):
            raise ValueError("pose must have three finite coordinates and three finite angles")
        object.__setattr__(self, "pos", tuple(float(v) for v in self.pos))
        object.__setattr__(self, "rpy", tuple(float(v) for v in self.rpy))

    def shifted(self, dx=0.0, dy=0.0, dz=0.0) -> "Pose":
        return Pose((self.pos[0] + dx, self.pos[1] + dy, self.pos[2] + dz), self.rpy)

    def to_list(self):
        return list(self.pos) + list(self.rpy)

    @classmethod
    def from_list(cls, v):
        return cls(tuple(v[:3]), tuple(v[3:6]))


@dataclass
class Reference:
    t: np.ndarray  # (N,)
    r: np.ndarray  # (N, 3)
    theta: np.ndarray  # (N, 3)
    feet: np.ndarray  # (N, 4, 3)
    pitch_keyframe: float | None = None


def reference_trajectory(init: Pose, final: Pose, n: int, dt: float, model: RobotModel,
                         pitch_threshold: float = 0.05) -> Reference:
    """Linear interpolation of the base pose; pitch gets a slope keyframe mid-way on large height changes."""
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    p0, p1 = np.array(init.pos), np.array(final.pos)
    a0, a1 = np.array(init.rpy), np.array(final.rpy)
    r = p0 + s[:, None] * (p1 - p0)
    theta = a0 + s[:, None] * (a1 - a0)
    dz = p1[2] - p0[2]
    dxy = float(np.hypot(*(p1[:2] - p0[:2])))
    key = None
    if abs(dz) > pitch_threshold:
        key = math.atan2(dz, dxy)
        # keyframe about the axis perpendicular to the motion: nose up (negative pitch) when
        # climbing forward, left side up (positive roll) when climbing to the left
        yaw = a0[2]
        fwd = math.cos(yaw) * (p1[0] - p0[0]) + math.sin(yaw) * (p1[1] - p0[1])
        lat = -math.sin(yaw) * (p1[0] - p0[0]) + math.cos(yaw) * (p1[1] - p0[1])
        if abs(fwd) >= abs(lat):
            axis, mid = 1, -key * (1 if fwd >= 0 else -1)
        else:
            axis, mid = 0, key * (1 if lat >= 0 else -1)
        theta[:, axis] = np.where(s <= 0.5, a0[axis] + (mid - a0[axis]) * s / 0.5,
                                  mid + (a1[axis] - mid) * (s - 0.5) / 0.5)
    offs = model.foot_offsets()
    feet = np.empty((n, 4, 3))
    for i in range(n):
        feet[i] = r[i] + offs @ euler_matrix(theta[i]).T
    return Reference(np.arange(n) * dt, r, theta, feet, key)
