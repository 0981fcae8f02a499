import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import lsq_linear

from terrain_synth.abstraction import GridSpec, TerrainPolygon
from terrain_synth.errors import EmptyPolygonsError
from terrain_synth.feasibility import canonical_layout, standing_pose
from terrain_synth.micp import (FEAS, INFEAS, GO2, Gait, MicpConfig, MicpProblem, Pose, build_gait_fixed,
                                build_gait_free, check_solution, default_catalog, extract_gait, solve, stand, trot,
                                unpack)
from terrain_synth.micp.bnb import smooth, solve_exhaustive
from terrain_synth.micp.ipm import solve_qp
from terrain_synth.micp.problem import binary_step_knots, friction_directions
from terrain_synth.micp.retarget import retarget_pose
from terrain_synth.templates import cell_polygons

WEIGHT = 147.84651  # 15.071 kg * 9.81 m/s^2


def square(pid, c, s, z=0.0):
    return TerrainPolygon.from_vertices(pid, [(c[0] - s, c[1] - s, z), (c[0] + s, c[1] - s, z),
                                              (c[0] + s, c[1] + s, z), (c[0] - s, c[1] + s, z)])


@pytest.fixture(scope="module")
def stand_solution():
    grid = GridSpec((0, 0), 3, 3, 0.8)
    polys = cell_polygons("flat", grid, (1, 1))
    pose = standing_pose(grid, (1, 1), 0.0, GO2)
    prob = build_gait_fixed(pose, pose, polys, stand(1.0, "stand"), GO2, MicpConfig())
    res = solve(prob, "feasibility", deterministic=True)
    assert res.ok
    return prob, unpack(prob, smooth(prob, res.x).x)


def test_standing_forces_carry_the_weight(stand_solution):
    _, traj = stand_solution
    assert GO2.mass * 9.81 == pytest.approx(WEIGHT, abs=1e-9)
    sums = traj.f[:, :, 2].sum(axis=1)
    assert np.allclose(sums, WEIGHT, atol=1e-6)
    assert not traj.has_flight()


def test_standing_solution_passes_independent_check(stand_solution):
    prob, traj = stand_solution
    rep = check_solution(prob, traj, tol=1e-6)
    assert rep.passed, str(rep)
    assert rep.residuals["dynamics"] <= 1e-6
    assert rep.residuals["integration"] <= 1e-8


def test_check_detects_tampering(stand_solution):
    prob, traj = stand_solution
    bad = unpack(prob, traj.x.copy())
    bad.f[3, 0, 2] += 5.0
    assert not check_solution(prob, bad).passed


def test_problem_round_trip(stand_solution):
    prob, _ = stand_solution
    again = MicpProblem.from_dict(prob.to_dict())
    assert again.dumps() == prob.dumps()


def test_trot_step_on_flat():
    grid, a, b, polys = canonical_layout(((0, 1), "flat", "flat"), 0.8)
    p0, p1 = standing_pose(grid, a, 0.0, GO2), standing_pose(grid, b, 0.0, GO2)
    cfg = MicpConfig()
    g = default_catalog()[0]
    prob = build_gait_fixed(p0, p1, polys, g, GO2, cfg)
    res = solve(prob, "feasibility", cfg, deterministic=True)
    assert res.ok
    traj = unpack(prob, smooth(prob, res.x, cfg).x)
    assert check_solution(prob, traj).passed
    assert np.allclose(traj.r[-1], p1.pos, atol=1e-6)


def test_ten_metre_jump_is_infeasible():
    p0 = Pose((0.0, 0.0, 0.29))
    p1 = Pose((10.0, 0.0, 0.29))
    polys = [square("a", (0, 0), 0.4), square("b", (10, 0), 0.4)]
    res = solve(build_gait_free(p0, p1, polys, GO2, MicpConfig()), "feasibility", deterministic=True)
    assert res.status == INFEAS


def test_gait_free_clears_a_gap_with_flight():
    """Two pads 0.5 m apart: the gait-free program finds a schedule with an aerial phase."""
    cfg = MicpConfig()
    grid, a, b, polys = canonical_layout(((0, 1), "flat", "gap"), 0.8)
    p0, p1 = standing_pose(grid, a, 0.0, GO2), standing_pose(grid, b, 0.0, GO2)
    prob = build_gait_free(p0, p1, polys, GO2, cfg)
    res = solve(prob, "feasibility", cfg, deterministic=True)
    assert res.status == FEAS
    traj = unpack(prob, res.x)
    assert check_solution(prob, traj).passed
    assert traj.has_flight()
    g = extract_gait(traj, "free")
    assert g.has_flight(cfg.dt)


def _stand_instance(rng):
    pose = Pose((0.0, 0.0, 0.29))
    offs = GO2.foot_offsets()
    polys = []
    for j in range(4):
        for _ in range(int(rng.integers(1, 4))):
            polys.append(square(f"p{len(polys)}", offs[j, :2] + rng.uniform(-0.2, 0.2, 2), rng.uniform(0.03, 0.1)))
    return pose, polys


def test_branch_and_bound_matches_enumeration():
    rng = np.random.default_rng(11)
    cfg = MicpConfig()
    seen = {FEAS: 0, INFEAS: 0}
    tried = 0
    while tried < 40:
        pose, polys = _stand_instance(rng)
        prob = build_gait_fixed(pose, pose, polys, stand(0.5, "s"), GO2, cfg)
        if len(prob.free_binaries()) > 16:
            continue
        tried += 1
        res = solve(prob, "feasibility", cfg, deterministic=True)
        ref, _ = solve_exhaustive(prob, cfg)
        assert res.status == ref
        seen[ref] += 1
        if res.ok:
            assert check_solution(prob, unpack(prob, res.x)).passed
    assert seen[FEAS] and seen[INFEAS]


def test_parallel_search_agrees_with_serial():
    rng = np.random.default_rng(5)
    cfg = MicpConfig()
    for _ in range(6):
        pose, polys = _stand_instance(rng)
        prob = build_gait_fixed(pose, pose, polys, stand(0.5, "s"), GO2, cfg)
        a = solve(prob, "feasibility", cfg, deterministic=True)
        b = solve(prob, "feasibility", cfg, workers=2)
        assert a.status == b.status


def test_optimize_mode_not_worse_than_smoothing():
    grid, a, b, polys = canonical_layout(((0, 1), "flat", "flat"), 0.8)
    p0, p1 = standing_pose(grid, a, 0.0, GO2), standing_pose(grid, b, 0.0, GO2)
    cfg = MicpConfig()
    prob = build_gait_fixed(p0, p1, polys, default_catalog()[0], GO2, cfg)
    opt = solve(prob, "optimize", cfg, deterministic=True)
    feas = solve(prob, "feasibility", cfg, deterministic=True)
    sm = smooth(prob, feas.x, cfg)
    assert opt.ok and opt.objective <= sm.objective + 1e-6 * max(1.0, abs(sm.objective))


@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_interior_point_matches_bounded_least_squares(seed):
    rng = np.random.default_rng(seed)
    m, n = 12, 6
    C = rng.normal(size=(m, n))
    d = rng.normal(size=m)
    lb = rng.uniform(-1.0, 0.0, n)
    ub = lb + rng.uniform(0.2, 1.5, n)
    # 0.5|Cx - d|^2 = 0.5 x'C'Cx - d'Cx + const
    P, q = C.T @ C, -C.T @ d
    status, x = solve_qp(P, q, np.zeros((0, n)), np.zeros(0), np.zeros((0, n)), np.zeros(0), lb, ub)
    ref = lsq_linear(C, d, bounds=(lb, ub), tol=1e-12, method="bvls")
    assert status == "optimal"
    f = lambda v: 0.5 * np.sum((C @ v - d) ** 2)
    assert f(x) == pytest.approx(f(ref.x), rel=1e-6, abs=1e-8)


def test_interior_point_equality_kkt():
    rng = np.random.default_rng(2)
    n = 5
    L = rng.normal(size=(n, n))
    P = L @ L.T + np.eye(n)
    q = rng.normal(size=n)
    A = rng.normal(size=(2, n))
    b = rng.normal(size=2)
    K = np.block([[P, A.T], [A, np.zeros((2, 2))]])
    ref = np.linalg.solve(K, np.concatenate([-q, b]))[:n]
    status, x = solve_qp(P, q, A, b, np.zeros((0, n)), np.zeros(0), np.full(n, -np.inf), np.full(n, np.inf))
    assert status == "optimal" and np.allclose(x, ref, atol=1e-7)


@given(st.floats(0.2, 1.2), st.sampled_from([4, 6, 8]), st.floats(0, 2 * math.pi), st.floats(0, 2.0),
       st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_friction_pyramid_is_inscribed(mu, K, ang, mag, nx, ny):
    n = np.array([nx, ny, 1.0])
    n /= np.linalg.norm(n)
    D, slope = friction_directions(n, mu, K)
    assert slope == pytest.approx(mu * math.cos(math.pi / K))
    t1 = D[0]
    t2 = np.cross(n, t1)
    f = n + mag * (math.cos(ang) * t1 + math.sin(ang) * t2)
    inside_pyramid = np.all(D @ f <= slope * (n @ f) + 1e-12)
    if inside_pyramid:
        assert mag <= mu + 1e-9
    # the pyramid corners touch the cone
    corner = n + mu * (math.cos(math.pi / K) * t1 + math.sin(math.pi / K) * t2)
    assert np.max(D @ corner - slope) == pytest.approx(0.0, abs=1e-9)


def test_binary_step_grid_covers_all_knots():
    cfg = MicpConfig()
    N = int(round(cfg.M * cfg.dt_m / cfg.dt)) + 1
    ks = binary_step_knots(N, cfg.dt, cfg.dt_m, cfg.M)
    flat = [k for g in ks for k in g]
    assert sorted(flat) == list(range(N)) and len(ks) == cfg.M


def test_config_validation():
    with pytest.raises(ValueError):
        MicpConfig(dt=0.03, dt_m=0.1)
    with pytest.raises(ValueError):
        MicpConfig(w_acc=-1)
    assert MicpConfig.from_dict(MicpConfig(dt=0.02).to_dict()) == MicpConfig(dt=0.02)


@given(st.sampled_from([0.02, 0.05, 0.1]), st.floats(0.5, 3.0))
def test_trot_contact_alternates_diagonals(dt, dur):
    dur = round(dur / dt) * dt
    g = trot(dur)
    c = g.contact_matrix(dt)
    assert c.shape == (g.n_knots(dt), 4)
    assert Gait.from_dict(g.to_dict()) == g
    # diagonal pairs share their schedule
    assert (c[:, 0] == c[:, 3]).all() and (c[:, 1] == c[:, 2]).all()


def test_retarget_moves_base_over_support():
    grid = GridSpec((0, 0), 3, 3, 0.8)
    polys = cell_polygons("dense_stone", grid, (1, 1))
    pose = standing_pose(grid, (1, 1), 0.0, GO2).shifted(0.07, -0.05)
    out = retarget_pose(pose, polys, GO2, deterministic=True)
    assert out is not None
    new, feet = out
    assert new.rpy == pose.rpy
    assert max(abs(a - b) for a, b in zip(new.pos, pose.pos)) <= MicpConfig().retarget_threshold + 1e-9
    for f in feet:
        assert any(max(p.halfspaces()[0] @ f[:2] - p.halfspaces()[1]) <= 1e-6 for p in polys)


def test_retarget_fails_without_support():
    far = [square("x", (5.0, 5.0), 0.1)]
    assert retarget_pose(Pose((0.0, 0.0, 0.29)), far, GO2, deterministic=True) is None
    with pytest.raises(EmptyPolygonsError):
        retarget_pose(Pose((0.0, 0.0, 0.29)), [], GO2)
