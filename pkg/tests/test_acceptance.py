"""End-to-end acceptance checks. Each test reports one PASS/FAIL line."""
import os
import time

import numpy as np
from oracles import oracle_winning, random_game, replay_sound
from scenarios import stone_field_spec

from terrain_synth.abstraction import GridSpec, TerrainCatalog, TerrainPolygon
from terrain_synth.cli import RunConfig, cmd_offline, cmd_online
from terrain_synth.feasibility import GaitFreeOracle, canonical_layout, standing_pose
from terrain_synth.manager import map_codes, run_offline, sweep_terrain_states
from terrain_synth.micp import (GO2, MicpConfig, Pose, build_gait_fixed, build_gait_free, check_solution,
                                default_catalog, solve, stand, unpack)
from terrain_synth.micp.bnb import smooth, solve_exhaustive
from terrain_synth.repair import DisallowedLedger, repair
from terrain_synth.runtime import execute, from_layout, schedule, total_idle
from terrain_synth.spec import build_spec, enumerate_candidate_skills, reduce_spec
from terrain_synth.synthesis import build_game, extract_strategy, solve_game, verify_strategy
from terrain_synth.templates import cell_polygons, type_height

WEIGHT = 147.84651


def gap_row_world():
    """5x5 flat map whose middle row is a gap: crossing it needs moves the trot catalog lacks."""
    names = ["flat"] * 25
    names[10:15] = ["gap"] * 5
    return from_layout(names, 5, 5)


def gap_corridor():
    """One flat lane between obstacle walls, interrupted by a gap cell."""
    names = []
    for j in range(6):
        names += ["obstacle", "gap" if j == 2 else "flat", "obstacle"]
    return from_layout(names, 3, 6, start=(1, 0), goal_cell=(1, 5))


def robot_atoms(spec):
    return {p.id for p in spec.inputs if p.kind.startswith("robot")}


# 1 ------------------------------------------------------------------------------------------

def test_c01_example_repair(criterion):
    t0 = time.perf_counter()
    cat, grid, state, spec = stone_field_spec(request=(0, 0), drop_into=(0, 0))
    unrealizable_before = not solve_game(build_game(spec)).realizable
    oracle = GaitFreeOracle(cat, GO2, MicpConfig(), 0.8, deterministic=True)
    res = repair(spec, oracle, DisallowedLedger(), seed=0)
    into = [sk for sk in res.new_skills if sk.target == (0, 0)]
    certified = True
    for sk in into:
        g = res.gaits[sk.gait_id]
        gl, a, b, polys = canonical_layout(sk.kind, 0.8)
        p0 = standing_pose(gl, a, type_height(sk.kind[1]), GO2)
        p1 = standing_pose(gl, b, type_height(sk.kind[2]), GO2)
        prob = build_gait_fixed(p0, p1, polys, g, GO2, MicpConfig())
        r = solve(prob, "feasibility", deterministic=True)
        certified &= r.ok and check_solution(prob, unpack(prob, r.x)).passed
    secs = time.perf_counter() - t0
    ok = unrealizable_before and res.realizable and bool(into) and certified and secs < 60
    criterion(1, ok, f"new skills into request: {[s.id for s in into]}, realizable={res.realizable}, "
                     f"gait re-certified={certified}, {secs:.1f} s")


# 2 ------------------------------------------------------------------------------------------

def _random_instance(rng):
    pose = Pose((0.0, 0.0, 0.29))
    final = pose.shifted(*rng.uniform(-0.08, 0.08, 2))
    polys = []
    for k in range(int(rng.integers(2, 5))):
        c = rng.uniform([-0.45, -0.3], [0.45, 0.3])
        w, h = rng.uniform(0.04, 0.45, 2)
        z = float(rng.choice([0.0, 0.0, 0.04]))
        polys.append(TerrainPolygon.from_vertices(
            f"p{k}", [(c[0] - w, c[1] - h, z), (c[0] + w, c[1] - h, z), (c[0] + w, c[1] + h, z),
                      (c[0] - w, c[1] + h, z)]))
    dur = float(rng.choice([0.5, 0.75, 0.95]))
    return pose, final, polys, stand(dur, "stand")


def test_c02_branch_and_bound_vs_enumeration(criterion):
    rng = np.random.default_rng(2024)
    cfg = MicpConfig()
    t0 = time.perf_counter()
    agree, counts, n = 0, {}, 0
    while n < 100:
        p0, p1, polys, g = _random_instance(rng)
        prob = build_gait_fixed(p0, p1, polys, g, GO2, cfg)
        if prob.layout.N > 20 or len(prob.free_binaries()) > 12:
            continue
        n += 1
        res = solve(prob, "feasibility", cfg, deterministic=True)
        ref, _ = solve_exhaustive(prob, cfg)
        agree += res.status == ref
        counts[ref] = counts.get(ref, 0) + 1
    secs = time.perf_counter() - t0
    ok = agree == 100 and len(counts) == 2 and secs < 300
    criterion(2, ok, f"{agree}/100 verdicts agree ({counts}), {secs:.1f} s")


# 3 ------------------------------------------------------------------------------------------

def test_c03_constraint_soundness(criterion):
    cfg = MicpConfig()
    trajs = []
    grid = GridSpec((0, 0), 3, 3, 0.8)
    pose = standing_pose(grid, (1, 1), 0.0, GO2)
    prob = build_gait_fixed(pose, pose, cell_polygons("flat", grid, (1, 1)), stand(1.0, "stand"), GO2, cfg)
    r = solve(prob, "feasibility", cfg, deterministic=True)
    stand_traj = unpack(prob, smooth(prob, r.x, cfg).x)
    trajs.append((prob, stand_traj))
    for kind in [((0, 1), "flat", "flat"), ((0, 1), "flat", "dense_stone"), ((1, 0), "dense_stone", "flat"),
                 ((0, -1), "flat", "high"), ((0, 1), "flat", "gap")]:
        gl, a, b, polys = canonical_layout(kind, 0.8)
        p0 = standing_pose(gl, a, type_height(kind[1]), GO2)
        p1 = standing_pose(gl, b, type_height(kind[2]), GO2)
        if kind[2] == "gap":
            prob = build_gait_free(p0, p1, polys, GO2, cfg)
            r = solve(prob, "feasibility", cfg, deterministic=True)
        else:
            for g in default_catalog():
                prob = build_gait_fixed(p0, p1, polys, g, GO2, cfg)
                r = solve(prob, "feasibility", cfg, deterministic=True)
                if r.ok:
                    break
        if r.ok:
            trajs.append((prob, unpack(prob, r.x)))
            trajs.append((prob, unpack(prob, smooth(prob, r.x, cfg).x)))
    reports = [check_solution(p, t, tol=1e-6) for p, t in trajs]
    worst_dyn = max(rep.residuals["dynamics"] for rep in reports)
    sums = stand_traj.f[:, :, 2].sum(axis=1)
    force_err = float(np.max(np.abs(sums - WEIGHT)))
    ok = all(rep.passed for rep in reports) and worst_dyn <= 1e-8 and force_err <= 1e-3 and len(trajs) >= 8
    criterion(3, ok, f"{sum(r.passed for r in reports)}/{len(reports)} trajectories pass at 1e-6, "
                     f"max dynamics residual {worst_dyn:.1e}, stance sum f_z {sums.mean():.5f} N")


# 4 ------------------------------------------------------------------------------------------

def test_c04_game_solver_vs_oracle(criterion):
    rng = np.random.default_rng(4)
    same, replayed, sound = 0, 0, 0
    sizes = list(rng.permutation(np.round(np.exp(rng.uniform(np.log(2), np.log(5000), 100))).astype(int)))
    sizes[0] = 5000
    for k, n in enumerate(sizes):
        mode = "true" if k % 2 == 0 else "one"
        game = random_game(rng, int(n), int(rng.integers(1, 3)), mode)
        sol = solve_game(game)
        same += bool((sol.winning == oracle_winning(game)).all())
        if mode == "true" and sol.realizable:
            replayed += 1
            sound += replay_sound(game, sol, extract_strategy(game, sol))
    # strategies of real specifications are model-checked as well
    checked = 0
    for req in [(0, 0), (1, 2), (2, 2), (0, 2)]:
        _, _, _, spec = stone_field_spec(request=req, drop_into=None)
        game = build_game(spec)
        sol = solve_game(game)
        if sol.realizable:
            checked += verify_strategy(game, extract_strategy(game, sol), spec)
    ok = same == 100 and sound == replayed and replayed > 0 and checked == 4
    criterion(4, ok, f"{same}/100 winning sets identical (max {max(sizes)} states), "
                     f"{sound}/{replayed} strategies replay sound, {checked}/4 spec strategies verified")


# 5 ------------------------------------------------------------------------------------------

def test_c05_partial_evaluation_removes_inputs(criterion):
    cat = TerrainCatalog(("flat", "dense_stone", "sparse_stone"))
    assert cat.n_t == 4
    grid = GridSpec((0, 0), 3, 3, 0.8)
    full = build_spec(enumerate_candidate_skills(grid, "4", cat), grid, cat.n_t, obstacle_code=cat.code("obstacle"))
    n_inputs = len(full.inputs)
    rng = np.random.default_rng(5)
    pairs = left = 0
    for seed in range(4):
        names = list(rng.choice(cat.names, size=20, p=[0.4, 0.25, 0.25, 0.1]))
        sc = from_layout(names, 5, 4, catalog=cat)
        codes = map_codes(sc.polygons, sc.grid, cat, sc.classifier)
        states, requests = sweep_terrain_states(codes, sc.grid, cat)
        for s in states:
            for r in requests:
                red = reduce_spec(full, s, r)
                pairs += 1
                left += len(red.atom_names() - robot_atoms(red) - set(red.outputs))
    remaining = len(robot_atoms(full))
    ok = left == 0 and pairs > 0
    criterion(5, ok, f"{pairs} pairs, {left} terrain/request atoms left; inputs {n_inputs} -> {remaining} "
                     f"({100 * (1 - remaining / n_inputs):.1f}% removed)")


# 6 ------------------------------------------------------------------------------------------

def test_c06_repair_call_economy(criterion):
    sc = gap_row_world()
    lib, report, _ = run_offline(sc.polygons, sc.grid, sc.catalog, default_catalog(), GO2, MicpConfig(),
                                 deterministic=True)
    ok = report.pairs_total >= 20 and report.oracle_calls < report.candidate_transitions \
        and report.pairs_solved == report.pairs_total
    criterion(6, ok, f"{report.pairs_total} pairs, {report.oracle_calls} gait-free calls vs "
                     f"{report.candidate_transitions} candidate transitions "
                     f"({100 * report.call_reduction:.1f}% fewer)")


# 7 ------------------------------------------------------------------------------------------

def test_c07_gap_runtime_repair(criterion):
    t0 = time.perf_counter()
    sc = gap_corridor()
    lib, _, _ = run_offline(sc.polygons, sc.grid, sc.catalog, default_catalog(), GO2, MicpConfig(),
                            exclude=("gap",), deterministic=True)
    tr = execute(lib, sc, deterministic=True)
    reps = [e for e in tr.events if e["tag"] == "runtime_repair"]
    flight = [f for e in reps for f in e.get("flight", [])]
    secs = time.perf_counter() - t0
    ok = len(reps) == 1 and any(flight) and tr.status == "goal_reached" and secs < 120
    criterion(7, ok, f"{len(reps)} runtime repair(s), new skills {[e['new_skills'] for e in reps]}, "
                     f"flight={any(flight)}, status {tr.status}, {secs:.1f} s")


# 8 ------------------------------------------------------------------------------------------

def test_c08_disallowed_detour(criterion, flat_world):
    sc, lib, _, _ = flat_world
    nominal = execute(lib, sc, deterministic=True)
    tr = execute(lib, sc, deterministic=True, fail_transitions=[((2, 1), (2, 2))])
    tags = [e["tag"] for e in tr.events if e["tag"] != "advance"]
    fail = next((e for e in tr.events if e["tag"] == "solve_failure"), None)
    after = [e for e in tr.events if fail is not None and e["seq"] > fail["seq"]]
    resyn = next((e for e in after if e["tag"] == "resynthesis" and e.get("disallowed")), None)
    ok = (fail is not None and bool(fail.get("disallowed")) and resyn is not None
          and tr.status == "goal_reached" and tr.path != nominal.path and tr.count("runtime_repair") == 0
          and ((2, 1), (2, 2)) not in list(zip(tr.path, tr.path[1:])))
    criterion(8, ok, f"events {tags}, path {tr.path} (nominal {nominal.path})")


# 9 ------------------------------------------------------------------------------------------

def test_c09_scheduler_idle_time(criterion):
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        segs = list(zip(rng.exponential(1.0, n) + 1e-3, rng.uniform(0.5, 3.0, n)))
        tl = schedule(segs)
        expected = sum(max(0.0, segs[i][0] - (tl[i - 1].end - tl[i - 1].ready)) for i in range(1, n))
        gaps_ok = all(b.start == a.end for a, b in zip(tl, tl[1:]) if b.action == "append")
        bad += not (abs(total_idle(tl) - expected) <= 1e-9 and gaps_ok)
    criterion(9, bad == 0, f"{1000 - bad}/1000 segment lists match the closed form")


# 10 -----------------------------------------------------------------------------------------

def _dir_bytes(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def test_c10_deterministic_outputs(criterion, tmp_path):
    sc = gap_row_world()
    scen = tmp_path / "scenario.json"
    sc.save(scen)
    runs = []
    for k in range(2):
        root = tmp_path / f"run{k}"
        cfg = RunConfig(str(scen), None, None, str(root / "off"), 0, (3, 3), "go2", 5000, None, True)
        cmd_offline(cfg)
        cfg = RunConfig(str(scen), None, str(root / "off" / "library"), str(root / "on"), 0, (3, 3), "go2", 5000,
                        None, True)
        cmd_online(cfg)
        runs.append(_dir_bytes(root))
    same = runs[0] == runs[1]
    ok = same and len(runs[0]) > 5
    criterion(10, ok, f"{len(runs[0])} files, byte-identical={same}")
