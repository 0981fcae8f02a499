"""Single-rigid-body robot models with a fixed leg Jacobian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOOT_NAMES = ("FL", "FR", "HL", "HR")
# sign of the nominal offset along base x (forward) and y (left) for each foot
FOOT_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
GRAVITY = np.array([0.0, 0.0, -9.81])


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def euler_matrix(rpy):
    """World-from-base rotation for ZYX Euler angles given as (roll, pitch, yaw)."""
    r, p, y = rpy
    return rot_z(y) @ rot_y(p) @ rot_x(r)


@dataclass(frozen=True)
class RobotModel:
    name: str
    mass: float
    inertia: tuple  # diagonal
    tau_max: tuple  # hip abduction, hip flexion, knee
    tau_base: tuple
    q_ref: tuple
    p_ref: tuple  # front-left nominal foot offset in the base frame
    p_max: tuple
    links: tuple  # abduction offset, thigh, calf
    n_f: int = 4

    def __post_init__(self):
        if self.mass <= 0 or min(self.inertia) <= 0:
            raise ValueError("mass and inertia must be positive")
        if self.n_f != 4:
            raise ValueError("only quadrupeds are modelled")

    @property
    def weight(self) -> float:
        return -self.mass * GRAVITY[2]

    def foot_offsets(self) -> np.ndarray:
        """Nominal foot positions in the base frame, one row per foot."""
        p = np.asarray(self.p_ref, dtype=float)
        out = np.empty((4, 3))
        out[:, :2] = FOOT_SIGNS * p[:2]
        out[:, 2] = p[2]
        return out

    def leg_fk(self, q, side: float) -> np.ndarray:
        """Foot position relative to the hip for joint angles q; side is +1 (left) or -1 (right)."""
        l0, l1, l2 = self.links
        R0 = rot_x(q[0])
        p = R0 @ np.array([0.0, side * l0, 0.0])
        p = p + R0 @ rot_y(q[1]) @ np.array([0.0, 0.0, -l1])
        p = p + R0 @ rot_y(q[1] + q[2]) @ np.array([0.0, 0.0, -l2])
        return p

    def jacobian(self, foot: int) -> np.ndarray:
        """Numerical Jacobian of the leg at q_ref (rows: foot xyz, cols: joints)."""
        side = FOOT_SIGNS[foot, 1]
        q = np.asarray(self.q_ref, dtype=float)
        J = np.empty((3, 3))
        h = 1e-7
        for k in range(3):
            dq = np.zeros(3)
            dq[k] = h
            J[:, k] = (self.leg_fk(q + dq, side) - self.leg_fk(q - dq, side)) / (2 * h)
        return J

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


GO2 = RobotModel(
    name="go2", mass=15.071, inertia=(0.152, 0.369, 0.388), tau_max=(23.5, 23.5, 45.4),
    tau_base=(20.0, 20.0, 20.0), q_ref=(0.0, 0.72, -1.44), p_ref=(0.1805, 0.1308, -0.29),
    p_max=(0.15, 0.1, 0.15), links=(0.0955, 0.213, 0.213),
)

CHOTU = RobotModel(
    name="chotu", mass=19.978, inertia=(0.396, 0.915, 1.107), tau_max=(23.5, 23.5, 33.5),
    tau_base=(25.0, 25.0, 25.0), q_ref=(0.0, 0.72, -1.44), p_ref=(0.2118, 0.210, -0.30),
    p_max=(0.15, 0.1, 0.15), links=(0.09, 0.22, 0.22),
)

MODELS = {"go2": GO2, "chotu": CHOTU}


def get_model(name: str) -> RobotModel:
    try:
        return MODELS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown robot {name!r}; choose from {sorted(MODELS)}") from None
