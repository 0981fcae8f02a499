"""Contact schedules: per-foot stance intervals over a fixed horizon."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

_EPS = 1e-9


@dataclass(frozen=True)
class Gait:
    """Stance intervals are half-open [a, b); a stance ending at the horizon also covers t = T."""

    id: str
    duration: float
    stance: tuple  # per foot: ((a, b), ...)

    def __post_init__(self):
        if len(self.stance) != 4:
            raise ValueError("gait needs four feet")
        for ivs in self.stance:
            last = -np.inf
            for a, b in ivs:
                if not (-_EPS <= a < b <= self.duration + _EPS) or a < last - _EPS:
                    raise ValueError(f"gait {self.id}: bad stance interval ({a}, {b})")
                last = b

    def in_stance(self, foot: int, t: float) -> bool:
        for a, b in self.stance[foot]:
            if a - _EPS <= t < b - _EPS or (abs(b - self.duration) < _EPS and abs(t - b) < _EPS):
                return True
        return False

    def n_knots(self, dt: float) -> int:
        n = self.duration / dt
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"gait {self.id}: duration {self.duration} is not a multiple of dt={dt}")
        return int(round(n)) + 1

    def contact_matrix(self, dt: float) -> np.ndarray:
        """Boolean (N, 4) stance table at the knots t_i = i*dt."""
        n = self.n_knots(dt)
        return np.array([[self.in_stance(j, i * dt) for j in range(4)] for i in range(n)], dtype=bool)

    def n_steps(self) -> tuple:
        return tuple(len(s) for s in self.stance)

    def has_flight(self, dt: float = 0.05) -> bool:
        c = self.contact_matrix(dt)
        return bool((~c.any(axis=1)).any())

    def to_dict(self):
        return {"id": self.id, "duration": self.duration, "stance": [[list(iv) for iv in s] for s in self.stance]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["id"], float(d["duration"]), tuple(tuple(tuple(map(float, iv)) for iv in s) for s in d["stance"]))


def stance_runs(contact: np.ndarray) -> list:
    """Per foot, list of (first, last) knot indices of each maximal stance run."""
    out = []
    for j in range(contact.shape[1]):
        runs, start = [], None
        for i, c in enumerate(contact[:, j]):
            if c and start is None:
                start = i
            elif not c and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(contact) - 1))
        out.append(runs)
    return out


def stand(duration: float = 1.0, gid: str | None = None) -> Gait:
    return Gait(gid or f"stand_{duration:g}s", duration, tuple(((0.0, duration),) for _ in range(4)))


def _paired(gid, duration, pairs, n_phases, pad):
    """Alternate swing phases between foot pairs, with stance padding at both ends."""
    swing = (duration - 2 * pad) / n_phases
    if swing <= 0:
        raise ValueError("padding leaves no time for swing")
    bounds = [round(pad + k * swing, 9) for k in range(n_phases + 1)]
    stance = [[] for _ in range(4)]
    for j in range(4):
        t = 0.0
        for k in range(n_phases):
            if j in pairs[k % len(pairs)]:
                if bounds[k] > t:
                    stance[j].append((t, bounds[k]))
                t = bounds[k + 1]
        stance[j].append((t, duration))
    return Gait(gid, duration, tuple(tuple(s) for s in stance))


def trot(duration=2.0, n_phases=4, pad=0.2, gid=None) -> Gait:
    return _paired(gid or f"trot_{duration:g}s", duration, [(0, 3), (1, 2)], n_phases, pad)


def bound(duration=2.0, n_phases=4, pad=0.2, front_first=True, gid=None) -> Gait:
    pairs = [(0, 1), (2, 3)] if front_first else [(2, 3), (0, 1)]
    return _paired(gid or f"bound_{duration:g}s", duration, pairs, n_phases, pad)


def pace(duration=2.0, n_phases=4, pad=0.2, gid=None) -> Gait:
    return _paired(gid or f"pace_{duration:g}s", duration, [(0, 2), (1, 3)], n_phases, pad)


def default_catalog() -> list:
    """Gaits handed to the offline sweep: trots at three speeds and a front-leading bound."""
    return [trot(1.5, 4, 0.1), trot(2.0, 4, 0.2), trot(3.0, 6, 0.3), bound(2.0, 4, 0.2)]


def gait_from_contact(contact: np.ndarray, dt: float, gid: str) -> Gait:
    """Gait whose knot table reproduces ``contact`` (shape (N, 4)) at step dt."""
    n = contact.shape[0]
    T = round((n - 1) * dt, 9)
    stance = []
    for runs in stance_runs(contact):
        ivs = []
        for a, b in runs:
            end = T if b == n - 1 else round((b + 1) * dt, 9)
            ivs.append((round(a * dt, 9), end))
        stance.append(tuple(ivs))
    return Gait(gid, T, tuple(stance))


def save_catalog(gaits, path):
    with open(path, "w") as fh:
        json.dump({"gaits": [g.to_dict() for g in gaits]}, fh, indent=1, sort_keys=True)


def load_catalog(path) -> list:
    with open(path) as fh:
        data = json.load(fh)
    return [Gait.from_dict(d) for d in data["gaits"]]
