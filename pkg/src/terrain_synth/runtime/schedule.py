"""Coordination of planning time and trajectory time.

Solves run back to back: the solve for segment i starts as soon as the solve for
segment i-1 has finished. A new segment is appended seamlessly when its solve is
done before the running segment ends; otherwise the robot holds its stance until
the solve completes.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Slot:
    index: int
    pt: float
    tt: float
    ready: float  # time the solve finished
    start: float
    end: float
    idle: float
    action: str  # "append" or "wait"

    def to_dict(self):
        return dict(self.__dict__)


def schedule(segments) -> list:
    """Timeline for a list of (planning time, trajectory time) pairs."""
    out = []
    ready = 0.0
    end = None
    for k, (pt, tt) in enumerate(segments):
        if pt <= 0 or tt <= 0:
            raise ValueError("planning and trajectory times must be positive")
        ready += pt
        if end is None:
            start, idle = ready, 0.0
        else:
            idle = max(0.0, ready - end)
            start = end + idle
        end = start + tt
        out.append(Slot(k, pt, tt, ready, start, end, idle, "wait" if idle > 0 else "append"))
    return out


def total_idle(timeline) -> float:
    return sum(s.idle for s in timeline)
