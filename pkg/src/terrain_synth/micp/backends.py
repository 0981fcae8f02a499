"""Convex relaxation solvers behind a common interface.

A backend is created once per problem and re-solved with different variable bounds,
which is all branch-and-bound needs.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .ipm import solve_qp

FEASIBLE, INFEASIBLE, FAILED = "feasible", "infeasible", "failed"


def max_violation(problem, x, lb=None, ub=None) -> float:
    lb = problem.lb if lb is None else lb
    ub = problem.ub if ub is None else ub
    v = 0.0
    if problem.A_eq.shape[0]:
        v = max(v, float(np.max(np.abs(problem.A_eq @ x - problem.b_eq))))
    if problem.A_ub.shape[0]:
        v = max(v, float(np.max(problem.A_ub @ x - problem.b_ub, initial=0.0)))
    v = max(v, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
    return v


class HighsBackend:
    """HiGHS simplex (LP) or active-set QP, warm-started across bound changes."""

    name = "highs"

    def __init__(self, problem, quadratic: bool, tol: float = 1e-9):
        import highspy

        self._hs = highspy
        self.problem = problem
        self.quadratic = quadratic
        self.tol = tol
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", tol)
        h.setOptionValue("dual_feasibility_tolerance", tol)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        # the active-set QP can cycle on degenerate faces; cap it and fall back to the IPM
        h.setOptionValue("qp_iteration_limit", 20000)
        A = sp.vstack([problem.A_eq, problem.A_ub]).tocsc()
        m_eq = problem.A_eq.shape[0]
        lp = highspy.HighsLp()
        lp.num_col_ = problem.n
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = problem.q if quadratic else np.zeros(problem.n)
        lp.col_lower_ = problem.lb
        lp.col_upper_ = problem.ub
        inf = highspy.kHighsInf
        lp.row_lower_ = np.concatenate([problem.b_eq, np.full(problem.A_ub.shape[0], -inf)])
        lp.row_upper_ = np.concatenate([problem.b_eq, problem.b_ub])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.a_matrix_.num_col_ = problem.n
        lp.a_matrix_.num_row_ = A.shape[0]
        self.m_eq = m_eq
        if quadratic:
            model = highspy.HighsModel()
            model.lp_ = lp
            # lower triangle, column-wise
            H = sp.tril(problem.P).tocsc()
            hes = highspy.HighsHessian()
            hes.dim_ = problem.n
            hes.format_ = highspy.HessianFormat.kTriangular
            hes.start_ = H.indptr
            hes.index_ = H.indices
            hes.value_ = H.data
            model.hessian_ = hes
            h.passModel(model)
        else:
            h.passModel(lp)
        self.h = h
        self.lp_count = 0
        self._fallback = None

    def solve(self, lb, ub):
        """(status, x, objective) of the relaxation under the given bounds."""
        h = self.h
        idx = np.arange(self.problem.n, dtype=np.int32)
        h.changeColsBounds(len(idx), idx, lb, ub)
        S = self._hs.HighsModelStatus
        # the active-set QP solver sometimes stalls just above a very tight tolerance;
        # relax it step by step, from a cold start, before reporting a failure
        ladder = [self.tol, 1e-8] if self.quadratic else [self.tol, self.tol]
        st = None
        for k, tol in enumerate(ladder):
            if k:
                h.clearSolver()
            h.setOptionValue("primal_feasibility_tolerance", tol)
            h.setOptionValue("dual_feasibility_tolerance", tol)
            self.lp_count += 1
            h.run()
            st = h.getModelStatus()
            if st == S.kOptimal:
                x = np.array(h.getSolution().col_value)
                if max_violation(self.problem, x, lb, ub) <= 1e-7:
                    if tol != self.tol:
                        h.setOptionValue("primal_feasibility_tolerance", self.tol)
                        h.setOptionValue("dual_feasibility_tolerance", self.tol)
                    return FEASIBLE, x, float(h.getInfo().objective_function_value)
            elif st == S.kInfeasible:
                return INFEASIBLE, None, None
        h.setOptionValue("primal_feasibility_tolerance", self.tol)
        h.setOptionValue("dual_feasibility_tolerance", self.tol)
        if st == S.kUnboundedOrInfeasible and not self.quadratic:
            return INFEASIBLE, None, None
        if self.quadratic:
            if self._fallback is None:
                self._fallback = IpmBackend(self.problem, True, self.tol)
            out = self._fallback.solve(lb, ub)
            self.lp_count += 1
            return out
        return FAILED, None, None


class IpmBackend:
    """In-repo primal-dual interior point method (dense-free, sparse normal equations)."""

    name = "ipm"

    def __init__(self, problem, quadratic: bool, tol: float = 1e-9):
        self.problem = problem
        self.quadratic = quadratic
        self.tol = tol
        self.lp_count = 0

    def solve(self, lb, ub):
        p = self.problem
        self.lp_count += 1
        P = p.P if self.quadratic else sp.csr_matrix((p.n, p.n))
        q = p.q if self.quadratic else np.zeros(p.n)
        status, x = solve_qp(P, q, p.A_eq, p.b_eq, p.A_ub, p.b_ub, lb, ub, tol=self.tol)
        if status == "optimal":
            obj = float(0.5 * x @ (P @ x) + q @ x)
            return FEASIBLE, x, obj
        if status == "infeasible":
            return INFEASIBLE, None, None
        return FAILED, None, None


BACKENDS = {"highs": HighsBackend, "ipm": IpmBackend}


def make_backend(name, problem, quadratic, tol=1e-9):
    try:
        cls = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}") from None
    if quadratic and cls is HighsBackend:
        # HiGHS's active-set QP is far slower than the IPM on these problems and can stall
        cls = IpmBackend
    return cls(problem, quadratic, tol)
