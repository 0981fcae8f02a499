"""terrain-synth command line: offline synthesis, online execution and single-skill checks."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .abstraction import TerrainPolygon
from .errors import ConfigError, NumericalFailure
from .micp import MicpConfig, default_catalog, get_model, load_catalog

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
GRIDS = {"3x3": (3, 3), "5x5": (5, 5)}


@dataclass
class RunConfig:
    scenario: str | None
    gaits: str | None
    library: str | None
    out: str
    seed: int
    grid: tuple
    robot: str
    node_budget: int | None
    time_budget: float | None
    deterministic: bool
    gait_free: bool = False

    def micp(self) -> MicpConfig:
        kw = {}
        if self.node_budget is not None:
            kw["node_budget"] = self.node_budget
        if self.time_budget is not None:
            kw["time_budget"] = self.time_budget
        threads = os.environ.get("TERRAIN_SYNTH_THREADS")
        if threads:
            try:
                kw["workers"] = max(1, int(threads))
            except ValueError:
                raise ConfigError(f"TERRAIN_SYNTH_THREADS must be an integer, got {threads!r}") from None
        if self.deterministic:
            kw["workers"] = 1
        return MicpConfig(**kw)

    def model(self):
        try:
            return get_model(self.robot)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def gait_list(self):
        if self.gaits is None:
            return default_catalog()
        try:
            return load_catalog(self.gaits)
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"cannot read gait catalog {self.gaits}: {e}") from None


def _config(a) -> RunConfig:
    if a.grid not in GRIDS:
        raise ConfigError(f"unsupported grid {a.grid!r}")
    return RunConfig(getattr(a, "scenario", None), getattr(a, "gaits", None), getattr(a, "library", None), a.out,
                     a.seed, GRIDS[a.grid], a.robot, a.node_budget, a.time_budget, a.deterministic,
                     getattr(a, "gait_free", False))


def load_scenario(path, seed=None):
    """A full scenario file, or a generator recipe {"kind", "seed", "params"}."""
    from .runtime import TerrainScenario, generate_scenario
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from None
    if "polygons" in d:
        return TerrainScenario.from_dict(d)
    if "kind" not in d:
        raise ConfigError("scenario needs either polygons or a generator kind")
    return generate_scenario(d["kind"], d.get("seed", 0) if seed is None else seed, d.get("params"))


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- commands -----------------------------------------------------------------------------

def cmd_offline(cfg: RunConfig, exclude=()) -> dict:
    from .manager import run_offline
    from .repair import write_log
    if cfg.scenario is None:
        raise ConfigError("--scenario is required")
    sc = load_scenario(cfg.scenario)
    gaits = cfg.gait_list()
    unknown = [n for n in exclude if n not in sc.catalog.names]
    if unknown:
        raise ConfigError(f"unknown terrain types to exclude: {unknown}")
    os.makedirs(cfg.out, exist_ok=True)
    log = []
    lib, report, checks = run_offline(sc.polygons, sc.grid, sc.catalog, gaits, cfg.model(), cfg.micp(), cfg.grid,
                                      cfg.seed, tuple(exclude), sc.classifier, cfg.deterministic, repair_log=log)
    lib_dir = cfg.library or os.path.join(cfg.out, "library")
    lib.save(lib_dir)
    rep = report.to_dict()
    _write_json(os.path.join(lib_dir, "report.json"), rep)
    _write_json(os.path.join(cfg.out, "report.json"), rep)
    _write_json(os.path.join(cfg.out, "sweep.json"),
                [c.to_dict() if not cfg.deterministic else {**c.to_dict(), "seconds": None,
                                                             "attempts": [a[:2] + (None,) + a[3:] for a in c.attempts]}
                 for c in checks])
    if cfg.deterministic:
        for r in log:
            r["seconds"] = None
    write_log(log, os.path.join(cfg.out, "repair_log.jsonl"))
    return rep


def cmd_online(cfg: RunConfig, fail=(), perturb=0.0) -> dict:
    from .manager import StrategyLibrary
    from .runtime import execute, perturb_polygons, render_trace
    if cfg.scenario is None or cfg.library is None:
        raise ConfigError("--scenario and --library are required")
    if not os.path.isfile(os.path.join(cfg.library, "catalog.json")):
        raise ConfigError(f"no strategy library at {cfg.library}")
    sc = load_scenario(cfg.scenario)
    try:
        lib = StrategyLibrary.load(cfg.library)
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"cannot load library: {e}") from None
    online = perturb_polygons(sc, cfg.seed, perturb) if perturb else sc
    os.makedirs(cfg.out, exist_ok=True)
    tr = execute(lib, sc, sc.goal, cfg.model(), cfg.micp(), cfg.seed, cfg.deterministic, fail, online.polygons,
                 cfg.grid)
    tr.write(os.path.join(cfg.out, "trace.jsonl"))
    render_trace(online, tr, os.path.join(cfg.out, "frames"))
    counts = {t: tr.count(t) for t in ("advance", "solve_failure", "runtime_repair", "resynthesis")}
    return {"status": tr.status, "path": [list(c) for c in tr.path], **counts}


def _parse_skill(text, model):
    """(init pose, final pose, polygons) from "DIR:SRC:DST" on template footholds, "STAY:TYPE",
    or a JSON file {"init": [x, y, z, (r, p, y)], "final": [...], "polygons": [...]}."""
    from .abstraction import GridSpec
    from .feasibility import canonical_layout, standing_pose
    from .micp import Pose
    from .spec import direction_name, movement_directions
    from .templates import cell_polygons, type_height
    if os.path.isfile(text):
        try:
            with open(text) as fh:
                d = json.load(fh)
            polys = [TerrainPolygon.from_dict(p) for p in d["polygons"]]
            init, final = (Pose(tuple(v[:3]), tuple(v[3:6]) if len(v) >= 6 else (0.0, 0.0, 0.0))
                           for v in (d["init"], d["final"]))
            return init, final, polys
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad skill file {text}: {e}") from None
    parts = text.split(":")
    names = {direction_name(d): tuple(d) for d in movement_directions("8")}
    try:
        if parts[0].upper() == "STAY" and len(parts) == 2:
            grid = GridSpec((0.0, 0.0), 3, 3, 0.8)
            a = b = (1, 1)
            src = dst = parts[1]
            polys = cell_polygons(src, grid, a)
        elif len(parts) == 3:
            src, dst = parts[1], parts[2]
            grid, a, b, polys = canonical_layout((names[parts[0].upper()], src, dst), 0.8)
        else:
            raise KeyError(text)
    except KeyError as e:
        raise ConfigError(f"cannot parse skill {text!r}: {e}") from None
    return (standing_pose(grid, a, type_height(src), model), standing_pose(grid, b, type_height(dst), model),
            polys)


def cmd_check_skill(cfg: RunConfig, skill: str, gait_id: str | None) -> dict:
    from .micp import build_gait_fixed, build_gait_free, check_solution, solve, unpack
    from .micp.bnb import smooth
    model = cfg.model()
    mc = cfg.micp()
    p0, p1, polys = _parse_skill(skill, model)
    if cfg.gait_free:
        prob = build_gait_free(p0, p1, polys, model, mc)
        gait = None
    else:
        gaits = {g.id: g for g in cfg.gait_list()}
        from .micp import stand
        gaits.setdefault("stand", stand(1.0, "stand"))
        gid = gait_id or next(iter(gaits))
        if gid not in gaits:
            raise ConfigError(f"unknown gait {gid!r}; choose from {sorted(gaits)}")
        gait = gaits[gid]
        prob = build_gait_fixed(p0, p1, polys, gait, model, mc)
    res = solve(prob, "feasibility", mc, deterministic=cfg.deterministic)
    out = {"verdict": res.status, "nodes": res.nodes, "lps": res.lps, "note": res.note,
           "gait": None if gait is None else gait.id}
    if not cfg.deterministic:
        out["seconds"] = round(res.seconds, 4)
    if res.ok:
        sm = smooth(prob, res.x, mc)
        traj = unpack(prob, sm.x)
        rep = check_solution(prob, traj)
        out["check"] = "PASS" if rep.passed else "FAIL"
        out["force_sum_z"] = round(float(traj.f[0, :, 2].sum()), 5)
        out["flight"] = traj.has_flight()
        out["schedule"] = {n: "".join("#" if c else "." for c in traj.contact[:, j])
                           for j, n in enumerate(("FL", "FR", "HL", "HR"))}
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "trajectory.json"), "w") as fh:
            fh.write(traj.dumps(ndigits=9) + "\n")
    return out


# -- entry point ----------------------------------------------------------------------------

def _common(p):
    p.add_argument("--out", required=True, help="output directory (nothing is written elsewhere)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default="3x3", help="local window: 3x3 or 5x5")
    p.add_argument("--robot", default="go2", help="go2 or chotu")
    p.add_argument("--node-budget", type=int, default=None)
    p.add_argument("--time-budget", type=float, default=None)
    p.add_argument("--deterministic", action="store_true",
                   help="single worker, no wall-clock budgets, timing fields omitted")
    p.add_argument("--gaits", default=None, help="gait catalog JSON (default: built-in trots and bound)")


def _parse_fail(items):
    out = []
    for s in items or ():
        try:
            a, b = s.split(":")
            out.append((tuple(int(v) for v in a.split(",")), tuple(int(v) for v in b.split(","))))
        except ValueError:
            raise ConfigError(f"--fail expects I,J:K,L, got {s!r}") from None
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="terrain-synth", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("offline", help="sweep, certify and synthesize a strategy library")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--library", default=None, help="library directory (default: OUT/library)")
    p.add_argument("--exclude", action="append", default=[], help="terrain type left out of the sweep")
    p = sub.add_parser("online", help="execute a library on a scenario")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--fail", action="append", default=[], help="force the move I,J:K,L to fail online")
    p.add_argument("--perturb", type=float, default=0.0, help="polygon perturbation magnitude (m)")
    p = sub.add_parser("check-skill", help="solve one skill instance")
    _common(p)
    p.add_argument("--skill", required=True, help="DIR:SRC:DST, STAY:TYPE, or a JSON file")
    p.add_argument("--gait", default=None)
    p.add_argument("--gait-free", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        cfg = _config(a)
        if a.command == "offline":
            out = cmd_offline(cfg, a.exclude)
        elif a.command == "online":
            out = cmd_online(cfg, _parse_fail(a.fail), a.perturb)
        else:
            out = cmd_check_skill(cfg, a.skill, a.gait)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(out, indent=1, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
