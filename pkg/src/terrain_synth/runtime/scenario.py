"""Synthetic terrain worlds and controlled perturbation of their polygons."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..abstraction import CATALOGS, ClassifierConfig, GridSpec, TerrainCatalog, TerrainPolygon
from ..errors import ConfigError
from ..templates import STRIP_WIDTH, cell_polygons

UNSTRUCTURED_WEIGHTS = {"flat": 0.4, "dense_stone": 0.25, "sparse_stone": 0.25, "gap": 0.1}
REBAR_SPACING = {"rebar-7": (0.15, 0.35), "rebar-14": (0.15, 0.6)}


@dataclass
class TerrainScenario:
    kind: str
    seed: int
    grid: GridSpec
    polygons: list
    catalog: TerrainCatalog
    classifier: ClassifierConfig = ClassifierConfig()
    layout: list | None = None  # type name per cell when generated from templates
    start: tuple = (0, 0)
    goal: tuple = (0.0, 0.0)
    params: dict = field(default_factory=dict)

    @property
    def obstacle_cells(self) -> list:
        if self.layout is None:
            return []
        return [c for c, n in zip(self.grid.cells(), self.layout) if n == self.catalog.obstacle]

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, "grid": self.grid.to_dict(),
                "polygons": [p.to_dict() for p in self.polygons],
                "catalog": self.catalog.to_dict(), "classifier": self.classifier.to_dict(),
                "layout": self.layout, "start": list(self.start), "goal": list(self.goal), "params": self.params}

    @classmethod
    def from_dict(cls, d):
        try:
            grid = GridSpec.from_dict(d["grid"])
            cat = d.get("catalog", "unstructured-4")
            catalog = CATALOGS[cat] if isinstance(cat, str) else TerrainCatalog.from_dict(cat)
            polys = [TerrainPolygon.from_dict(p) for p in d["polygons"]]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad scenario: {e}") from e
        start = tuple(d.get("start", (grid.n_cols // 2, 0)))
        goal = tuple(d.get("goal", grid.cell_center((grid.n_cols // 2, grid.n_rows - 1)).tolist()))
        return cls(d.get("kind", "custom"), int(d.get("seed", 0)), grid, polys, catalog,
                   ClassifierConfig.from_dict(d.get("classifier", {})), d.get("layout"), start, goal,
                   d.get("params", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read scenario {path}: {e}") from e
        return cls.from_dict(d)


def from_layout(names, n_cols, n_rows, cell_size=0.8, catalog="unstructured-4", seed=0, kind="custom",
                start=None, goal_cell=None, classifier=None) -> TerrainScenario:
    """Scenario from one type name per cell, rows listed bottom to top."""
    grid = GridSpec((0.0, 0.0), n_cols, n_rows, cell_size)
    names = list(names)
    if len(names) != grid.n_cells:
        raise ConfigError("layout must name every cell")
    polys = []
    for cell, n in zip(grid.cells(), names):
        polys.extend(cell_polygons(n, grid, cell))
    cat = CATALOGS[catalog] if isinstance(catalog, str) else catalog
    start = tuple(start) if start is not None else (n_cols // 2, 0)
    goal_cell = tuple(goal_cell) if goal_cell is not None else (n_cols // 2, n_rows - 1)
    goal = tuple(grid.cell_center(goal_cell).tolist())
    return TerrainScenario(kind, seed, grid, polys, cat, classifier or ClassifierConfig(), names, start, goal,
                           {"layout_rows": n_rows})


def generate_scenario(kind: str, seed: int = 0, params: dict | None = None) -> TerrainScenario:
    """Deterministic world for (kind, seed, params).

    unstructured-4/8: template cells drawn with ``weights``; rebar-7/14: a global mesh
    of 3 cm strips with seeded spacings; custom: an explicit ``layout``.
    """
    p = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "custom":
        if "layout" not in p:
            raise ConfigError("custom scenarios need a layout")
        return from_layout(p["layout"], p["n_cols"], p["n_rows"], p.get("cell_size", 0.8),
                           p.get("catalog", "unstructured-4"), seed, "custom", p.get("start"), p.get("goal_cell"))
    if kind.startswith("unstructured"):
        if kind not in CATALOGS:
            raise ConfigError(f"unknown scenario kind {kind!r}")
        n_cols, n_rows = p.get("n_cols", 5), p.get("n_rows", 5)
        weights = dict(p.get("weights", UNSTRUCTURED_WEIGHTS))
        cat = CATALOGS[kind]
        names = sorted(n for n in weights if n in cat.names)
        w = np.array([weights[n] for n in names], dtype=float)
        w /= w.sum()
        layout = [names[k] for k in rng.choice(len(names), size=n_cols * n_rows, p=w)]
        start = tuple(p.get("start", (n_cols // 2, 0)))
        # keep the start cell walkable on flat ground
        layout[start[1] * n_cols + start[0]] = "flat"
        sc = from_layout(layout, n_cols, n_rows, p.get("cell_size", 0.8), kind, seed, kind, start,
                         p.get("goal_cell"))
        sc.params = p
        return sc
    if kind in REBAR_SPACING:
        return _rebar(kind, seed, p, rng)
    raise ConfigError(f"unknown scenario kind {kind!r}")


def _rebar(kind, seed, p, rng):
    lo, hi = REBAR_SPACING[kind]
    n_cols, n_rows = p.get("n_cols", 5), p.get("n_rows", 5)
    s = p.get("cell_size", 0.6)
    grid = GridSpec((0.0, 0.0), n_cols, n_rows, s)
    W, H = n_cols * s, n_rows * s

    def offsets(length):
        out, x = [], float(rng.uniform(0.0, lo))
        while x + STRIP_WIDTH / 2 <= length:
            out.append(x)
            x += float(rng.uniform(lo, hi))
        return out

    xs, ys = offsets(W), offsets(H)
    polys = []
    w = STRIP_WIDTH
    for k, y in enumerate(ys):
        polys.append(TerrainPolygon.from_vertices(f"h{k}", [(0, y - w / 2, 0), (W, y - w / 2, 0), (W, y + w / 2, 0),
                                                             (0, y + w / 2, 0)]))
    for k, x in enumerate(xs):
        polys.append(TerrainPolygon.from_vertices(f"v{k}", [(x - w / 2, 0, 0), (x + w / 2, 0, 0), (x + w / 2, H, 0),
                                                             (x - w / 2, H, 0)]))
    start = tuple(p.get("start", (n_cols // 2, 0)))
    goal = tuple(grid.cell_center(tuple(p.get("goal_cell", (n_cols // 2, n_rows - 1)))).tolist())
    return TerrainScenario(kind, seed, grid, polys, CATALOGS[kind], ClassifierConfig(mode="rebar"), None, start,
                           goal, {**p, "x_strips": xs, "y_strips": ys})


def perturb_polygons(scenario: TerrainScenario, seed: int, magnitude: float) -> TerrainScenario:
    """Jitter every polygon by a shift and an inward shrink, each at most ``magnitude`` / 2.

    Polygons shrunk to (almost) nothing are dropped, so large magnitudes can turn
    stones into gaps.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    if magnitude == 0:
        return scenario
    rng = np.random.default_rng(seed)
    out = []
    for poly in scenario.polygons:
        pts = poly.points
        c = pts.mean(axis=0)
        radius = float(np.max(np.linalg.norm(pts[:, :2] - c[:2], axis=1)))
        shift = rng.uniform(-1.0, 1.0, size=2)
        shift *= (magnitude / 2) / max(1.0, float(np.linalg.norm(shift)))
        inset = float(rng.uniform(0.0, magnitude / 2))
        scale = 1.0 - inset / radius if radius > 0 else 0.0
        if scale <= 0.05:
            continue
        xy = c[:2] + scale * (pts[:, :2] - c[:2]) + shift
        new = [(x, y, poly.height_at(x - shift[0], y - shift[1])) for x, y in xy]
        out.append(TerrainPolygon.from_vertices(poly.id, new, poly.friction))
    return TerrainScenario(scenario.kind, scenario.seed, scenario.grid, out, scenario.catalog, scenario.classifier,
                           scenario.layout, scenario.start, scenario.goal,
                           {**scenario.params, "perturb_seed": seed, "perturb_magnitude": magnitude})
