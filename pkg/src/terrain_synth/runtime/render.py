"""Top-down SVG frames of an execution: grid, footholds, feet and the base path so far."""
from __future__ import annotations

import os

SCALE = 100.0  # pixels per metre
_FILL = {True: "#d9d2c5", False: "#9fb7c9"}


def _xy(p, h):
    return f"{p[0] * SCALE:.1f},{h - p[1] * SCALE:.1f}"


def render_frame(scenario, robot, feet=None, base_path=(), title="") -> str:
    g = scenario.grid
    corners = [g.cell_footprint(c) for c in g.cells()]
    xmax = max(float(c[:, 0].max()) for c in corners)
    ymax = max(float(c[:, 1].max()) for c in corners)
    w, h = xmax * SCALE + 20, ymax * SCALE + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}">',
           f'<rect x="0" y="0" width="{w:.0f}" height="{h:.0f}" fill="white"/>']
    for poly in scenario.polygons:
        pts = " ".join(_xy(p, h - 10) for p in poly.points)
        out.append(f'<polygon points="{pts}" fill="{_FILL[poly.offset <= 0.3]}" stroke="#555" stroke-width="0.5"/>')
    for c, fp in zip(g.cells(), corners):
        pts = " ".join(_xy(p, h - 10) for p in fp)
        stroke = "#c0392b" if tuple(c) == tuple(robot) else "#888"
        out.append(f'<polygon points="{pts}" fill="none" stroke="{stroke}" stroke-width="1"/>')
    if len(base_path) > 1:
        pts = " ".join(_xy(p, h - 10) for p in base_path)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#27ae60" stroke-width="2"/>')
    if feet is not None:
        for k in range(0, len(feet), 3):
            x, y = feet[k] * SCALE, h - 10 - feet[k + 1] * SCALE
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="4" fill="#2c3e50"/>')
    if title:
        out.append(f'<text x="5" y="14" font-size="12" font-family="monospace">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trace(scenario, trace, out_dir) -> list:
    """Write one frame per executed skill (plus the start) into ``out_dir``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    frames = [(tuple(scenario.start), None, [])] + list(trace.frames)
    paths = []
    for k, (robot, feet, path) in enumerate(frames):
        p = os.path.join(out_dir, f"frame_{k:04d}.svg")
        with open(p, "w") as fh:
            fh.write(render_frame(scenario, robot, feet, path, f"step {k} cell {robot[0]},{robot[1]}"))
        paths.append(p)
    return paths
