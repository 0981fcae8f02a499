"""Branch-and-bound over the binary variables of a MicpProblem."""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalFailure
from .backends import FAILED, FEASIBLE, INFEASIBLE, make_backend
from .config import MicpConfig

DIVE_NODES = 150  # node cap of the initial diving phase

OPTIMAL, FEAS, INFEAS, TIMEOUT, NUMERICAL = "OPTIMAL", "FEASIBLE", "INFEASIBLE", "TIMEOUT", "NUMERICAL_FAILURE"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    nodes: int = 0
    lps: int = 0
    seconds: float = 0.0
    note: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, FEAS)


class _Search:
    def __init__(self, problem, quadratic, cfg: MicpConfig, node_budget, deadline):
        self.p = problem
        self.quadratic = quadratic
        self.cfg = cfg
        self.backend = make_backend(cfg.backend, problem, quadratic, cfg.feas_tol)
        self.node_budget = node_budget
        self.deadline = deadline
        self.nodes = 0
        self.diving = False
        self.bins = problem.binaries
        self.pos = {int(b): k for k, b in enumerate(self.bins)}
        self.groups = [(np.array([self.pos[int(v)] for v in g]), s) for g, s in problem.groups]
        self.member = {}
        for gi, (g, _) in enumerate(self.groups):
            for k in g:
                self.member.setdefault(int(k), []).append(gi)

    # bounds on binaries are carried as two small arrays per node
    def propagate(self, blo, bhi):
        """Fix implied binaries from the sum groups; returns False on contradiction."""
        changed = True
        while changed:
            changed = False
            for g, sense in self.groups:
                ones = g[blo[g] > 0.5]
                if len(ones) > 1:
                    return False
                if len(ones) == 1:
                    others = g[(bhi[g] > 0.5) & (blo[g] < 0.5)]
                    if len(others):
                        bhi[others] = 0.0
                        changed = True
                elif sense == "=":
                    open_ = g[bhi[g] > 0.5]
                    if len(open_) == 0:
                        return False
                    if len(open_) == 1:
                        blo[open_] = 1.0
                        changed = True
        return True

    def relax(self, blo, bhi):
        lb, ub = self.p.lb.copy(), self.p.ub.copy()
        lb[self.bins], ub[self.bins] = blo, bhi
        return self.backend.solve(lb, ub)

    def out_of_budget(self):
        if self.nodes >= self.node_budget:
            return True
        return self.deadline is not None and time.perf_counter() > self.deadline

    def fractional(self, x):
        v = x[self.bins]
        return np.abs(v - np.round(v))

    def polish(self, blo, bhi, x):
        """Re-solve with all binaries rounded and fixed so rows hold exactly."""
        r = np.round(x[self.bins])
        st, x2, obj = self.relax(r.copy(), r.copy())
        return st, x2, obj

    def pick(self, x, frac):
        """Branching variable, lowest index on ties.

        While diving, the fractional binary with the largest value: following the
        foothold the relaxation already prefers finds feasible assignments quickly.
        Otherwise the most fractional one, which closes infeasible subtrees sooner.
        """
        if self.diving:
            v = np.where(frac > self.cfg.int_tol, x[self.bins], -1.0)
            return int(np.argmax(v - 1e-12 * np.arange(len(v))))
        return int(np.argmax(frac - 1e-12 * np.arange(len(frac))))

    def rounding(self, x, blo, bhi):
        v = x[self.bins].copy()
        lo, hi = blo.copy(), bhi.copy()
        for g, sense in self.groups:
            free = g[hi[g] > 0.5]
            if len(free) == 0:
                continue
            best = free[np.argmax(v[free])]
            pick = sense == "=" or v[best] >= 0.5
            hi[g] = 0.0
            lo[g] = 0.0
            if pick:
                hi[best] = lo[best] = 1.0
        rest = np.setdiff1d(np.arange(len(self.bins)), np.concatenate([g for g, _ in self.groups]) if self.groups else [])
        lo[rest] = hi[rest] = np.round(v[rest])
        return self.relax(lo, hi)

    def run(self, blo, bhi, incumbent=None):
        """Depth-first search from one node. Returns (status, x, obj)."""
        best_x, best_obj = None, np.inf if incumbent is None else incumbent
        stack = [(blo, bhi)]
        hit_budget = False
        failure = False
        while stack:
            if self.out_of_budget():
                hit_budget = True
                break
            lo, hi = stack.pop()
            lo, hi = lo.copy(), hi.copy()
            if not self.propagate(lo, hi):
                continue
            self.nodes += 1
            st, x, obj = self.relax(lo, hi)
            if st == FAILED:
                failure = True
                continue
            if st == INFEASIBLE:
                continue
            if self.quadratic and obj >= best_obj - 1e-9 * (1 + abs(best_obj)):
                continue
            frac = self.fractional(x)
            if frac.max(initial=0.0) <= self.cfg.int_tol:
                st2, x2, obj2 = self.polish(lo, hi, x)
                if st2 != FEASIBLE:
                    failure = True
                    continue
                if not self.quadratic:
                    return FEAS, x2, obj2
                if obj2 < best_obj:
                    best_x, best_obj = x2, obj2
                continue
            if not self.quadratic and (self.nodes == 1 or self.nodes % 10 == 0):
                st3, x3, obj3 = self.rounding(x, lo, hi)
                if st3 == FEASIBLE and self.fractional(x3).max(initial=0.0) <= self.cfg.int_tol:
                    st2, x2, obj2 = self.polish(lo, hi, x3)
                    if st2 == FEASIBLE:
                        return FEAS, x2, obj2
            k = self.pick(x, frac)
            up = (lo.copy(), hi.copy())
            up[0][k] = 1.0
            down = (lo.copy(), hi.copy())
            down[1][k] = 0.0
            first, second = (up, down) if x[self.bins[k]] >= 0.5 else (down, up)
            stack.append(second)
            stack.append(first)
        if best_x is not None:
            return (TIMEOUT if hit_budget else OPTIMAL), best_x, best_obj
        if hit_budget:
            return TIMEOUT, None, None
        if failure:
            return NUMERICAL, None, None
        return INFEAS, None, None


def solve(problem, mode: str = "feasibility", cfg: MicpConfig | None = None, node_budget: int | None = None,
          time_budget: float | None = None, workers: int | None = None, deterministic: bool = False) -> SolveResult:
    """Feasibility (zero objective LP relaxations) or optimisation (QP relaxations) by branch and bound.

    Statuses: FEASIBLE / OPTIMAL with a solution, INFEASIBLE (search exhausted or the
    root relaxation is infeasible), TIMEOUT when a budget ran out first, and
    NUMERICAL_FAILURE when a relaxation could not be solved reliably.
    """
    cfg = cfg or MicpConfig()
    if mode not in ("feasibility", "optimize"):
        raise ValueError("mode must be 'feasibility' or 'optimize'")
    quadratic = mode == "optimize"
    node_budget = cfg.node_budget if node_budget is None else node_budget
    time_budget = cfg.time_budget if time_budget is None else time_budget
    workers = cfg.workers if workers is None else workers
    t0 = time.perf_counter()
    deadline = None if (deterministic or time_budget is None) else t0 + time_budget
    s = _Search(problem, quadratic, cfg, node_budget, deadline)
    blo = problem.lb[problem.binaries].copy()
    bhi = problem.ub[problem.binaries].copy()
    if np.any(blo > bhi):
        return SolveResult(INFEAS, note="contradictory bounds")
    if not s.propagate(blo, bhi):
        return SolveResult(INFEAS, note="root certificate: binary groups cannot be satisfied", nodes=0)
    if workers > 1 and not quadratic:
        status, x, obj, nodes, lps = _parallel(problem, cfg, s, blo, bhi, workers, node_budget, deadline)
    else:
        status, x, obj = _two_phase(s, blo, bhi)
        nodes, lps = s.nodes, s.backend.lp_count
    if quadratic and obj is not None:
        obj += problem.c0
    note = ""
    if status == INFEAS and nodes <= 1:
        note = "root certificate: relaxation infeasible"
    res = SolveResult(status, x, obj, nodes, lps, time.perf_counter() - t0, note)
    return res


def smooth(problem, x, cfg: MicpConfig | None = None) -> SolveResult:
    """Minimise the tracking cost with the binaries of a feasible point held fixed."""
    cfg = cfg or MicpConfig()
    t0 = time.perf_counter()
    backend = make_backend(cfg.backend, problem, True, cfg.feas_tol)
    lb, ub = problem.lb.copy(), problem.ub.copy()
    v = np.round(x[problem.binaries])
    lb[problem.binaries] = ub[problem.binaries] = v
    st, x2, obj = backend.solve(lb, ub)
    if st != FEASIBLE:
        # keep the feasible point rather than losing it
        return SolveResult(FEAS, x, None, 0, backend.lp_count, time.perf_counter() - t0, "smoothing failed")
    return SolveResult(FEAS, x2, obj + problem.c0, 0, backend.lp_count,
                       time.perf_counter() - t0)


def _two_phase(s: _Search, blo, bhi):
    """A short diving search, then the full most-fractional search if that settled nothing.

    Both phases are exact tree searches, so an INFEASIBLE verdict from either is a proof.
    """
    if s.quadratic:
        return s.run(blo, bhi)
    budget = s.node_budget
    s.diving = True
    s.node_budget = min(budget, DIVE_NODES)
    status, x, obj = s.run(blo, bhi)
    s.diving = False
    s.node_budget = budget
    if status == TIMEOUT and not s.out_of_budget():
        status, x, obj = s.run(blo, bhi)
    return status, x, obj


def _parallel(problem, cfg, root, blo, bhi, workers, node_budget, deadline):
    """Split the tree near the root and explore subtrees concurrently; the first feasible leaf in
    depth-first order wins, so the verdict and solution do not depend on thread timing."""
    frontier = [(blo, bhi)]
    depth = 0
    while len(frontier) < 2 * workers and depth < 6:
        nxt = []
        for lo, hi in frontier:
            lo, hi = lo.copy(), hi.copy()
            if not root.propagate(lo, hi):
                continue
            root.nodes += 1
            st, x, _ = root.relax(lo, hi)
            if st != FEASIBLE:
                if st == FAILED:
                    nxt.append((lo, hi))  # let the worker report it
                continue
            frac = root.fractional(x)
            if frac.max(initial=0.0) <= cfg.int_tol:
                nxt.append((lo, hi))
                continue
            k = root.pick(x, frac)
            up, down = (lo.copy(), hi.copy()), (lo.copy(), hi.copy())
            up[0][k] = 1.0
            down[1][k] = 0.0
            nxt.extend([up, down] if x[root.bins[k]] >= 0.5 else [down, up])
        frontier = nxt
        depth += 1
        if not frontier:
            break
    if not frontier:
        return INFEAS, None, None, root.nodes, root.backend.lp_count
    per = max(1, (node_budget - root.nodes) // len(frontier))

    def work(node):
        s = _Search(problem, False, cfg, per, deadline)
        return _two_phase(s, *node) + (s.nodes, s.backend.lp_count)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        results = list(ex.map(work, frontier))
    nodes = root.nodes + sum(r[3] for r in results)
    lps = root.backend.lp_count + sum(r[4] for r in results)
    for st, x, obj, _, _ in results:
        if st == FEAS:
            return FEAS, x, obj, nodes, lps
    statuses = {r[0] for r in results}
    for st in (TIMEOUT, NUMERICAL):
        if st in statuses:
            return st, None, None, nodes, lps
    return INFEAS, None, None, nodes, lps


def solve_exhaustive(problem, cfg: MicpConfig | None = None):
    """Reference verdict: try every assignment of the free binaries with the relaxation solver.

    Assignments that break a sum group are rejected by evaluating the group row directly.
    Returns (status, x) with status FEASIBLE or INFEASIBLE.
    """
    cfg = cfg or MicpConfig()
    backend = make_backend(cfg.backend, problem, False, cfg.feas_tol)
    bins = problem.binaries
    blo, bhi = problem.lb[bins], problem.ub[bins]
    free = np.nonzero(blo < bhi)[0]
    if len(free) > 20:
        raise ValueError("too many free binaries for enumeration")
    pos = {int(b): k for k, b in enumerate(bins)}
    groups = [(np.array([pos[int(v)] for v in g]), s) for g, s in problem.groups]
    for bits in itertools.product((0.0, 1.0), repeat=len(free)):
        v = blo.copy()
        v[free] = bits
        ok = True
        for g, sense in groups:
            t = v[g].sum()
            if t > 1 + 1e-9 or (sense == "=" and t < 1 - 1e-9):
                ok = False
                break
        if not ok:
            continue
        lb, ub = problem.lb.copy(), problem.ub.copy()
        lb[bins] = ub[bins] = v
        st, x, _ = backend.solve(lb, ub)
        if st == FAILED:
            raise NumericalFailure("relaxation failed during enumeration")
        if st == FEASIBLE:
            return FEAS, x
    return INFEAS, None
