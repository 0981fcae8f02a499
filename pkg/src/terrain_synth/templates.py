"""Homogeneous polygon layouts for each terrain type, placed in one grid cell.

These are the predefined footholds used for offline skill checks and as the
building blocks of generated scenarios. Every layout classifies back to its own
type under the default classifier.
"""
from __future__ import annotations

import numpy as np

from .abstraction import GridSpec, TerrainPolygon

HEIGHT = {"high": 0.2, "low": -0.2, "high_gap": 0.2, "low_gap": -0.2, "obstacle": 0.5}
STRIP_WIDTH = 0.03
REBAR_SPACING = {"dense": 0.1, "sparse": 0.25, "extreme": 0.45}


def _rect(pid, grid: GridSpec, u0, v0, u1, v1, z):
    """Axis-aligned rectangle in grid coordinates, lifted to height z."""
    corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
    pts = [(*grid.to_world(c), z) for c in corners]
    return TerrainPolygon.from_vertices(pid, pts)


def _stones(grid, cell, name, z, side, gap, margin):
    s = grid.cell_size
    u0, v0 = cell[0] * s, cell[1] * s
    n = max(1, int(round((s - 2 * margin + gap) / (side + gap))))
    span = n * side + (n - 1) * gap
    start = (s - span) / 2
    out = []
    for a in range(n):
        for b in range(n):
            x = u0 + start + a * (side + gap)
            y = v0 + start + b * (side + gap)
            out.append(_rect(f"{name}{cell[0]}_{cell[1]}_{a}{b}", grid, x, y, x + side, y + side, z))
    return out


def _rails(grid, cell, name, z):
    """Two thin rails across a gap cell: enough for a static stance at the cell centre,
    too little to walk through with a regular gait."""
    s = grid.cell_size
    u0, v0 = cell[0] * s, cell[1] * s
    mid = v0 + s / 2
    return [_rect(f"{name}{cell[0]}_{cell[1]}_a", grid, u0, mid - 0.0405, u0 + s, mid - 0.0305, z),
            _rect(f"{name}{cell[0]}_{cell[1]}_b", grid, u0, mid + 0.3205, u0 + s, v0 + s, z)]


def _strips(grid, cell, name, across, along, z=0.0):
    """Rebar: ``across`` strips run along the grid u axis, ``along`` strips along v."""
    s = grid.cell_size
    u0, v0 = cell[0] * s, cell[1] * s
    w = STRIP_WIDTH

    def offsets(cls):
        if cls == "none":
            return []
        if cls == "single":
            return [s / 2]
        sp = REBAR_SPACING[cls]
        k = int((s - w) // sp)
        first = (s - k * sp) / 2
        return [first + i * sp for i in range(k + 1) if first + i * sp + w / 2 <= s]

    out = []
    for k, o in enumerate(offsets(across)):
        out.append(_rect(f"{name}{cell[0]}_{cell[1]}_h{k}", grid, u0, v0 + o - w / 2, u0 + s, v0 + o + w / 2, z))
    for k, o in enumerate(offsets(along)):
        out.append(_rect(f"{name}{cell[0]}_{cell[1]}_v{k}", grid, u0 + o - w / 2, v0, u0 + o + w / 2, v0 + s, z))
    return out


def cell_polygons(name: str, grid: GridSpec, cell, prefix: str = "") -> list:
    """Template footholds of terrain type ``name`` filling ``cell`` of ``grid``."""
    s = grid.cell_size
    z = HEIGHT.get(name, 0.0)
    tag = prefix or name[:2]
    if name in ("flat", "high", "low", "obstacle"):
        u0, v0 = cell[0] * s, cell[1] * s
        return [_rect(f"{tag}{cell[0]}_{cell[1]}", grid, u0, v0, u0 + s, v0 + s, z)]
    if name == "dense_stone":
        return _stones(grid, cell, tag, z, side=(s - 0.2) / 3, gap=0.07, margin=0.03)
    if name == "sparse_stone":
        return _stones(grid, cell, tag, z, side=(s - 0.16 - 0.04) / 2, gap=0.16, margin=0.02)
    if name in ("gap", "high_gap", "low_gap"):
        return _rails(grid, cell, tag, z)
    if "_" in name:
        across, along = name.split("_", 1)
        if across in ("dense", "sparse", "extreme", "single", "none") and along in ("dense", "sparse", "extreme", "single", "none"):
            return _strips(grid, cell, tag, across, along, z)
    raise KeyError(f"no template for terrain type {name!r}")


def type_height(name: str) -> float:
    return HEIGHT.get(name, 0.0)


def layout_polygons(grid: GridSpec, names) -> list:
    """Polygons for a full map given a type name per cell (in ``grid.cells()`` order)."""
    out = []
    for cell, name in zip(grid.cells(), names):
        out.extend(cell_polygons(name, grid, cell))
    return out


def polygons_near(polygons, lo, hi) -> list:
    """Polygons whose xy bounding box meets the box [lo, hi]."""
    lo, hi = np.asarray(lo), np.asarray(hi)
    out = []
    for p in polygons:
        xy = p.xy
        if np.all(xy.max(axis=0) >= lo) and np.all(xy.min(axis=0) <= hi):
            out.append(p)
    return out
