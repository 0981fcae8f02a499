"""Solver and discretisation settings."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class MicpConfig:
    dt: float = 0.05
    # gait-free binary grid
    dt_m: float = 0.1
    M: int = 15
    # collision binary grid (0 disables)
    dt_w: float = 0.5
    W: int = 0
    mu: float = 0.7
    friction_facets: int = 4
    h_swing: float = 0.0
    # bounds used both as physical limits and for big-M interval arithmetic
    v_max: float = 1.0
    a_max: float = 40.0
    foot_v_max: float = 4.0
    foot_a_max: float = 200.0
    ang_v_max: float = 3.0
    f_max: float = 400.0
    workspace_margin: float = 1.0
    # cost weights (optimize mode)
    w_pos: float = 1000.0
    w_ori: float = 1000.0
    w_foot: float = 1000.0
    w_acc: float = 10.0
    w_ang_acc: float = 10.0
    w_foot_acc: float = 0.5
    w_force: float = 0.1
    pitch_keyframe_dz: float = 0.05
    # branch and bound
    node_budget: int = 20000
    time_budget: float = 60.0
    int_tol: float = 1e-6
    feas_tol: float = 1e-9
    workers: int = 1
    backend: str = "highs"
    retarget_threshold: float = 0.2

    def __post_init__(self):
        for k in ("w_pos", "w_ori", "w_foot", "w_acc", "w_ang_acc", "w_foot_acc", "w_force"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be nonnegative")
        if self.dt <= 0 or self.dt_m <= 0 or self.M < 1:
            raise ValueError("time steps must be positive")
        ratio = self.dt_m / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt_m must be a multiple of dt")

    @property
    def gait_free_horizon(self) -> float:
        return self.M * self.dt_m

    def with_(self, **kw) -> "MicpConfig":
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


PRESETS = {
    "desk": MicpConfig(),
    # knot spacing used in the original hardware experiments (1.5 s horizon -> 76 knots)
    "hardware": MicpConfig(dt=0.02),
}
