"""Grid abstraction of terrain polygons, and grounding between cells and poses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

from . import kernels
from .errors import DegeneratePolygonError, OutOfGridError

DEFAULT_FRICTION = 0.7
_PLANAR_TOL = 1e-9
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class TerrainPolygon:
    """A convex planar foothold region.

    Vertices are stored counter-clockwise when seen from above. ``normal`` points
    upward and ``friction`` is the Coulomb coefficient of the surface.
    """

    id: str
    vertices: tuple
    normal: tuple
    friction: float = DEFAULT_FRICTION

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
            raise DegeneratePolygonError(f"polygon {self.id}: need >= 3 vertices in 3D")
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise DegeneratePolygonError(f"polygon {self.id}: normal must be a unit 3-vector")
        if not self.friction > 0:
            raise DegeneratePolygonError(f"polygon {self.id}: friction must be positive")
        d = float(n @ v[0])
        if np.max(np.abs(v @ n - d)) > _PLANAR_TOL:
            raise DegeneratePolygonError(f"polygon {self.id}: vertices are not coplanar")
        k = len(v)
        edges = np.roll(v, -1, axis=0) - v
        turn = np.cross(edges, np.roll(edges, -1, axis=0)) @ n
        if np.any(turn < -1e-12) and np.any(turn > 1e-12):
            raise DegeneratePolygonError(f"polygon {self.id}: not convex")
        if np.all(np.abs(turn) <= 1e-12) or k < 3:
            raise DegeneratePolygonError(f"polygon {self.id}: zero area")

    @classmethod
    def from_vertices(cls, id, vertices, friction=DEFAULT_FRICTION):
        """Build from vertices in any winding; the normal is computed (pointing up)."""
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
            raise DegeneratePolygonError(f"polygon {id}: need >= 3 vertices in 3D")
        c = v.mean(axis=0)
        n = np.zeros(3)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            n += np.cross(a - c, b - c)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise DegeneratePolygonError(f"polygon {id}: zero area")
        n /= norm
        if n[2] < 0:
            n, v = -n, v[::-1]
        if abs(n[2]) < 1e-9:
            raise DegeneratePolygonError(f"polygon {id}: vertical polygons are not footholds")
        # snap vertices onto the fitted plane so tiny round-off does not reject them
        d = float(n @ c)
        v = v - np.outer(v @ n - d, n) if np.max(np.abs(v @ n - d)) < 1e-7 else v
        return cls(str(id), tuple(map(tuple, v.tolist())), tuple(n.tolist()), float(friction))

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, :2].copy()

    @property
    def offset(self) -> float:
        return float(np.dot(self.normal, self.vertices[0]))

    @property
    def area_xy(self) -> float:
        return abs(kernels.polygon_area(self.xy))

    def height_at(self, x: float, y: float) -> float:
        nx, ny, nz = self.normal
        return (self.offset - nx * x - ny * y) / nz

    def centroid(self) -> np.ndarray:
        xy = self.xy
        return np.append(xy.mean(axis=0), self.height_at(*xy.mean(axis=0)))

    def halfspaces(self):
        """(A, b) with A @ [x, y] <= b describing the xy projection."""
        xy = self.xy
        if kernels.polygon_area(xy) < 0:
            xy = xy[::-1]
        e = np.roll(xy, -1, axis=0) - xy
        a = np.column_stack([e[:, 1], -e[:, 0]])
        nrm = np.linalg.norm(a, axis=1)
        keep = nrm > 1e-12
        a = a[keep] / nrm[keep, None]
        b = np.einsum("ij,ij->i", a, xy[keep])
        return a, b

    def to_dict(self):
        return {"id": self.id, "vertices": [list(p) for p in self.vertices], "friction": self.friction}

    @classmethod
    def from_dict(cls, d):
        return cls.from_vertices(d["id"], d["vertices"], d.get("friction", DEFAULT_FRICTION))


@dataclass(frozen=True)
class GridSpec:
    """A rectangular grid of square cells, optionally rotated by ``heading``."""

    origin: tuple = (0.0, 0.0)
    n_cols: int = 3
    n_rows: int = 3
    cell_size: float = 0.8
    heading: float = 0.0

    def __post_init__(self):
        if self.n_cols < 1 or self.n_rows < 1:
            raise ValueError("grid needs at least one row and column")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    def cells(self):
        """Cells in canonical order: row by row from the bottom, columns left to right."""
        return [(i, j) for j in range(self.n_rows) for i in range(self.n_cols)]

    def index(self, cell) -> int:
        return cell[1] * self.n_cols + cell[0]

    def contains(self, cell) -> bool:
        return 0 <= cell[0] < self.n_cols and 0 <= cell[1] < self.n_rows

    def _rot(self):
        c, s = math.cos(self.heading), math.sin(self.heading)
        return np.array([[c, -s], [s, c]])

    def to_world(self, uv) -> np.ndarray:
        return np.asarray(self.origin) + self._rot() @ np.asarray(uv, dtype=float)

    def to_grid(self, xy) -> np.ndarray:
        return self._rot().T @ (np.asarray(xy, dtype=float)[:2] - np.asarray(self.origin))

    def cell_center(self, cell) -> np.ndarray:
        i, j = cell
        return self.to_world(((i + 0.5) * self.cell_size, (j + 0.5) * self.cell_size))

    def cell_corners_grid(self, cell) -> np.ndarray:
        i, j = cell
        s = self.cell_size
        return np.array([[i * s, j * s], [(i + 1) * s, j * s], [(i + 1) * s, (j + 1) * s], [i * s, (j + 1) * s]])

    def cell_footprint(self, cell) -> np.ndarray:
        """Counter-clockwise world-frame corners of the cell."""
        return np.array([self.to_world(p) for p in self.cell_corners_grid(cell)])

    def cell_box(self, cell):
        fp = self.cell_footprint(cell)
        return tuple(fp.min(axis=0).tolist()), tuple(fp.max(axis=0).tolist())

    def sub_grid(self, lower_left, n_cols, n_rows) -> "GridSpec":
        """Window of this grid whose cell (0, 0) is ``lower_left`` here."""
        o = self.to_world((lower_left[0] * self.cell_size, lower_left[1] * self.cell_size))
        return GridSpec(tuple(o.tolist()), n_cols, n_rows, self.cell_size, self.heading)

    def to_dict(self):
        return {"origin": list(self.origin), "n_cols": self.n_cols, "n_rows": self.n_rows,
                "cell_size": self.cell_size, "heading": self.heading}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.get("origin", (0.0, 0.0))), int(d["n_cols"]), int(d["n_rows"]),
                   float(d["cell_size"]), float(d.get("heading", 0.0)))


@dataclass(frozen=True)
class TerrainType:
    code: int
    name: str


# Fallbacks used when a classifier label is missing from a smaller catalog.
_FALLBACK = {
    "high_gap": "gap",
    "low_gap": "gap",
    "high": "flat",
    "low": "flat",
    "extreme_stone": "sparse_stone",
}


@dataclass(frozen=True)
class TerrainCatalog:
    """Ordered terrain labels; the position of a label is its integer code.

    The obstacle label, when present, always takes the last code.
    """

    names: tuple
    obstacle: str | None = "obstacle"

    def __post_init__(self):
        names = tuple(self.names)
        if self.obstacle is not None and self.obstacle not in names:
            names = names + (self.obstacle,)
        if len(set(names)) != len(names):
            raise ValueError("terrain names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def n_t(self) -> int:
        return len(self.names)

    @property
    def walkable(self) -> tuple:
        return tuple(n for n in self.names if n != self.obstacle)

    def code(self, name: str) -> int:
        return self.names.index(name)

    def type(self, name: str) -> TerrainType:
        return TerrainType(self.code(name), name)

    def is_obstacle(self, code: int) -> bool:
        return self.obstacle is not None and self.names[code] == self.obstacle

    def resolve(self, label: str) -> TerrainType:
        seen = set()
        while label not in self.names:
            if label in seen:
                break
            seen.add(label)
            if label in _FALLBACK:
                label = _FALLBACK[label]
            elif "extreme" in label:
                label = label.replace("extreme", "sparse")
            elif "none" in label:
                label = label.replace("none", "single")
            elif label.endswith("gap") and "gap" in self.names:
                label = "gap"
            else:
                break
        if label not in self.names:
            raise KeyError(f"label {label!r} not in catalog {self.names}")
        return self.type(label)

    def to_dict(self):
        return {"names": [n for n in self.names if n != self.obstacle], "obstacle": self.obstacle}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (list, tuple)):
            names = tuple(d)
            return cls(names, "obstacle" if "obstacle" in names else None)
        return cls(tuple(d["names"]), d.get("obstacle", "obstacle"))


UNSTRUCTURED_4 = TerrainCatalog(("flat", "dense_stone", "sparse_stone", "gap"))
UNSTRUCTURED_8 = TerrainCatalog(("flat", "high", "low", "dense_stone", "sparse_stone", "gap", "high_gap", "low_gap"))
REBAR_7 = TerrainCatalog(("dense_dense", "dense_sparse", "sparse_dense", "sparse_sparse",
                          "single_sparse", "sparse_single", "flat"))
REBAR_14 = TerrainCatalog(tuple(f"{a}_{b}" for a in ("dense", "sparse", "extreme") for b in ("dense", "sparse", "extreme"))
                          + ("single_dense", "single_sparse", "single_extreme", "dense_single", "sparse_single"))
CATALOGS = {"unstructured-4": UNSTRUCTURED_4, "unstructured-8": UNSTRUCTURED_8,
            "rebar-7": REBAR_7, "rebar-14": REBAR_14}


@dataclass(frozen=True)
class ClassifierConfig:
    coverage_gap_ratio: float = 0.4
    height_bands: tuple = ((-math.inf, -0.15), (-0.15, 0.15), (0.15, math.inf))
    spacing_bands: tuple = ((0.05, 0.15), (0.15, 0.35), (0.35, math.inf))
    obstacle_height: float = 0.35
    flat_ratio: float = 0.9
    mode: str = "unstructured"

    def __post_init__(self):
        if not 0 < self.coverage_gap_ratio < 1 or not 0 < self.flat_ratio < 1:
            raise ValueError("ratios must lie in (0, 1)")
        for bands in (self.height_bands, self.spacing_bands):
            flat = [x for band in bands for x in band]
            if any(b[0] >= b[1] for b in bands) or flat != sorted(flat):
                raise ValueError("bands must be ordered and disjoint")
        if self.mode not in ("unstructured", "rebar"):
            raise ValueError("mode must be 'unstructured' or 'rebar'")

    def to_dict(self):
        enc = lambda x: None if math.isinf(x) else x  # noqa: E731
        return {"coverage_gap_ratio": self.coverage_gap_ratio,
                "height_bands": [[enc(a), enc(b)] for a, b in self.height_bands],
                "spacing_bands": [[enc(a), enc(b)] for a, b in self.spacing_bands],
                "obstacle_height": self.obstacle_height, "flat_ratio": self.flat_ratio, "mode": self.mode}

    @classmethod
    def from_dict(cls, d):
        def bands(v):
            out = []
            for a, b in v:
                a = -math.inf if a is None else float(a)
                b = math.inf if b is None else float(b)
                out.append((a, b))
            return tuple(out)
        kw = dict(d)
        if "height_bands" in kw:
            kw["height_bands"] = bands(kw["height_bands"])
        if "spacing_bands" in kw:
            kw["spacing_bands"] = bands(kw["spacing_bands"])
        return cls(**kw)


@dataclass(frozen=True)
class InputState:
    """One symbolic snapshot: robot cell, request cell and the terrain code of every cell.

    ``terrain`` lists codes in ``GridSpec.cells()`` order.
    """

    robot: tuple
    request: tuple
    terrain: tuple

    def terrain_at(self, grid: GridSpec, cell) -> int:
        return self.terrain[grid.index(cell)]

    def validate(self, grid: GridSpec, n_t: int | None = None):
        if not grid.contains(self.robot) or not grid.contains(self.request):
            raise OutOfGridError("robot or request outside the grid")
        if len(self.terrain) != grid.n_cells:
            raise ValueError("terrain map must cover every cell")
        if n_t is not None and any(not 0 <= c < n_t for c in self.terrain):
            raise ValueError("terrain code out of range")


@dataclass(frozen=True)
class Grounding:
    robot_center: tuple
    request_center: tuple
    robot_box: tuple
    request_box: tuple


# ---------------------------------------------------------------------------


def _band_index(value, bands):
    for k, (a, b) in enumerate(bands):
        if a <= value < b:
            return k
    return 0 if value < bands[0][0] else len(bands) - 1


def _spacing_class(spacing, cfg: ClassifierConfig) -> str:
    return ("dense", "sparse", "extreme")[min(_band_index(spacing, cfg.spacing_bands), 2)]


def _pieces(polygons):
    out = []
    for p in polygons:
        xy = p.xy
        area = abs(kernels.polygon_area(xy))
        if area > 1e-12:
            c = xy.mean(axis=0)
            out.append((p, xy, area, p.height_at(*c)))
    return out


def classify_cell(polygons: Sequence[TerrainPolygon], cfg: ClassifierConfig = ClassifierConfig(),
                  cell_size: float = 0.8, catalog: TerrainCatalog | None = None):
    """Classify the terrain of one cell from polygons already clipped to its footprint.

    Returns the raw label when ``catalog`` is None, otherwise the resolved TerrainType.
    """
    label = _classify_label(polygons, cfg, cell_size)
    return label if catalog is None else catalog.resolve(label)


def _classify_label(polygons, cfg, cell_size):
    cell_area = cell_size * cell_size
    pieces = _pieces(polygons)
    if not pieces:
        return "gap"
    tall = sum(a for _, _, a, h in pieces if h >= cfg.obstacle_height)
    if tall / cell_area >= cfg.coverage_gap_ratio:
        return "obstacle"
    shapes = [_ShapelyPolygon(xy) for _, xy, _, _ in pieces]
    cover = shapely.unary_union(shapes).area / cell_area
    total = sum(a for _, _, a, _ in pieces)
    mean_h = sum(a * h for _, _, a, h in pieces) / total
    band = _band_index(mean_h, cfg.height_bands)
    level = ("low", "", "high")[min(band, 2)]
    if cfg.mode == "rebar":
        return _classify_rebar(pieces, cfg, cover)
    if cover < cfg.coverage_gap_ratio:
        return f"{level}_gap" if level else "gap"
    if level:
        return level
    if cover >= cfg.flat_ratio:
        return "flat"
    if len(shapes) < 2:
        return "sparse_stone"
    gaps = []
    for k, s in enumerate(shapes):
        gaps.append(min(s.distance(t) for m, t in enumerate(shapes) if m != k))
    return f"{_spacing_class(float(np.mean(gaps)), cfg)}_stone"


def _classify_rebar(pieces, cfg, cover):
    if cover >= cfg.flat_ratio:
        return "flat"
    across, along = [], []
    for _, xy, _, _ in pieces:
        ext = xy.max(axis=0) - xy.min(axis=0)
        c = xy.mean(axis=0)
        if ext[0] >= ext[1]:
            across.append(c[1])
        else:
            along.append(c[0])

    def cls(offsets):
        offsets = sorted(offsets)
        merged = [o for k, o in enumerate(offsets) if k == 0 or o - offsets[k - 1] > 1e-6]
        if not merged:
            return "none"
        if len(merged) == 1:
            return "single"
        return _spacing_class(float(np.mean(np.diff(merged))), cfg)

    return f"{cls(across)}_{cls(along)}"


def _as_polygon(p):
    if isinstance(p, TerrainPolygon):
        return p
    if isinstance(p, Mapping):
        return TerrainPolygon.from_dict(p)
    raise DegeneratePolygonError(f"cannot interpret {p!r} as a polygon")


def clip_to_cell(poly: TerrainPolygon, grid: GridSpec, cell) -> TerrainPolygon | None:
    """Exact intersection of a polygon's footprint with a cell, lifted back to its plane."""
    local = np.array([grid.to_grid(v) for v in poly.xy])
    if kernels.polygon_area(local) < 0:
        local = local[::-1]
    piece = kernels.clip_convex(local, grid.cell_corners_grid(cell))
    if len(piece) < 3 or abs(kernels.polygon_area(piece)) < 1e-12:
        return None
    world = np.array([grid.to_world(q) for q in piece])
    pts = [(x, y, poly.height_at(x, y)) for x, y in world]
    try:
        return TerrainPolygon(f"{poly.id}@{cell[0]}_{cell[1]}", tuple(pts), poly.normal, poly.friction)
    except DegeneratePolygonError:
        # slivers from clipping can be numerically non-convex; they carry no area anyway
        return None


def polygons_by_cell(polys: Iterable, grid: GridSpec) -> dict:
    """Clip every polygon against every cell it overlaps."""
    out = {c: [] for c in grid.cells()}
    s = grid.cell_size
    for raw in polys:
        p = _as_polygon(raw)
        local = np.array([grid.to_grid(v) for v in p.xy])
        lo, hi = local.min(axis=0), local.max(axis=0)
        i0, j0 = max(0, int(math.floor(lo[0] / s))), max(0, int(math.floor(lo[1] / s)))
        i1, j1 = min(grid.n_cols - 1, int(math.floor(hi[0] / s))), min(grid.n_rows - 1, int(math.floor(hi[1] / s)))
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                piece = clip_to_cell(p, grid, (i, j))
                if piece is not None:
                    out[(i, j)].append(piece)
    return out


def abstract_grid(polys: Iterable, grid: GridSpec, cfg: ClassifierConfig = ClassifierConfig(),
                  catalog: TerrainCatalog | None = None) -> dict:
    """Terrain map {cell: TerrainType} (or raw labels when ``catalog`` is None)."""
    by_cell = polygons_by_cell(polys, grid)
    return {c: classify_cell(by_cell[c], cfg, grid.cell_size, catalog) for c in grid.cells()}


def cell_height(pieces: Sequence[TerrainPolygon]) -> float:
    """Area-weighted mean height of the clipped polygons (0 for an empty cell)."""
    ps = _pieces(pieces)
    total = sum(a for _, _, a, _ in ps)
    return sum(a * h for _, _, a, h in ps) / total if total > 0 else 0.0


def ground(state: InputState, grid: GridSpec) -> Grounding:
    return Grounding(tuple(grid.cell_center(state.robot).tolist()),
                     tuple(grid.cell_center(state.request).tolist()),
                     grid.cell_box(state.robot), grid.cell_box(state.request))


def inverse_ground(pose, grid: GridSpec) -> tuple:
    """Cell whose half-open footprint contains ``pose``; raises OutOfGridError otherwise."""
    u = grid.to_grid(pose)
    # absorb rotation round-off so exact boundary points keep the half-open convention
    u = np.round(u, 12)
    i, j = math.floor(u[0] / grid.cell_size), math.floor(u[1] / grid.cell_size)
    if not grid.contains((i, j)):
        raise OutOfGridError(f"pose {tuple(pose)} outside the grid")
    return (i, j)


def terrain_codes(terrain_map: Mapping, grid: GridSpec) -> tuple:
    """Integer terrain state (codes in canonical cell order) from a {cell: TerrainType} map."""
    return tuple(terrain_map[c].code for c in grid.cells())
