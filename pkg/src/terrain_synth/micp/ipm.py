"""Mehrotra predictor-corrector interior point method for sparse convex QPs.

    minimize    0.5 x'Px + q'x
    subject to  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub

Fixed variables are substituted out; finite bounds become inequality rows.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def solve_qp(P, q, A_eq, b_eq, A_ub, b_ub, lb, ub, tol=1e-9, max_iter=100):
    """Returns (status, x) with status in {"optimal", "infeasible", "failed"}."""
    lb, ub = np.asarray(lb, float), np.asarray(ub, float)
    if np.any(lb > ub + 1e-12):
        return "infeasible", None
    fixed = np.abs(ub - lb) <= 1e-12
    free = np.nonzero(~fixed)[0]
    x_fix = np.where(fixed, lb, 0.0)
    P = sp.csr_matrix(P)
    A_eq, A_ub = sp.csr_matrix(A_eq), sp.csr_matrix(A_ub)
    # substitute fixed variables
    Pf = P[free][:, free]
    qf = q[free] + P[free] @ x_fix
    Ae = A_eq[:, free]
    be = b_eq - A_eq @ x_fix
    Au = A_ub[:, free]
    bu = b_ub - A_ub @ x_fix
    # drop empty equality rows after substitution (they must hold already)
    nz = np.diff(Ae.tocsr().indptr) > 0
    if np.any(np.abs(be[~nz]) > 1e-9):
        return "infeasible", None
    Ae, be = Ae[nz], be[nz]
    nzu = np.diff(Au.tocsr().indptr) > 0
    if np.any(bu[~nzu] < -1e-9):
        return "infeasible", None
    Au, bu = Au[nzu], bu[nzu]
    lf, uf = lb[free], ub[free]
    I = sp.identity(len(free), format="csr")
    fl, fu = np.isfinite(lf), np.isfinite(uf)
    G = sp.vstack([Au, I[fu], -I[fl]]).tocsr()
    h = np.concatenate([bu, uf[fu], -lf[fl]])
    status, xf = _mehrotra(Pf, qf, Ae, be, G, h, tol, max_iter)
    if xf is None:
        return status, None
    x = x_fix.copy()
    x[free] = xf
    return status, x


def _mehrotra(P, q, A, b, G, h, tol, max_iter):
    n, me, m = P.shape[0], A.shape[0], G.shape[0]
    x = np.zeros(n)
    y = np.zeros(me)
    s = np.maximum(h - G @ x, 1.0)
    z = np.ones(m)
    scale = 1.0 + max(np.max(np.abs(q), initial=0), np.max(np.abs(b), initial=0), np.max(np.abs(h), initial=0))
    reg = 1e-10
    best_rp = np.inf
    stall = 0
    for _ in range(max_iter):
        rd = P @ x + q + A.T @ y + G.T @ z
        rp = A @ x - b
        rg = G @ x + s - h
        mu = s @ z / max(m, 1)
        pres = max(np.max(np.abs(rp), initial=0), np.max(np.abs(rg), initial=0))
        dres = np.max(np.abs(rd), initial=0)
        if pres <= tol * scale and dres <= tol * scale and mu <= tol:
            return "optimal", x
        if pres < 0.9 * best_rp:
            best_rp, stall = pres, 0
        else:
            stall += 1
        if stall > 25 and mu < 1e-10:
            return "infeasible", None
        D = z / s
        H = (P + G.T @ sp.diags(D) @ G + reg * sp.identity(n)).tocsc()
        K = sp.bmat([[H, A.T], [A, -reg * sp.identity(me)]], format="csc") if me else H
        try:
            lu = spla.splu(K)
        except RuntimeError:
            return "failed", None

        def step(rc):
            rhs1 = -rd - G.T @ (D * rg) + G.T @ (rc / s)
            rhs = np.concatenate([rhs1, -rp]) if me else rhs1
            sol = lu.solve(rhs)
            dx = sol[:n]
            dy = sol[n:] if me else np.zeros(0)
            dz = D * (G @ dx + rg) - rc / s
            ds = (-rc - s * dz) / z
            return dx, dy, dz, ds

        def max_step(v, dv):
            neg = dv < 0
            return min(1.0, float(np.min(-v[neg] / dv[neg]))) if np.any(neg) else 1.0

        # predictor
        dx, dy, dz, ds = step(s * z)
        a = min(max_step(s, ds), max_step(z, dz))
        mu_aff = (s + a * ds) @ (z + a * dz) / max(m, 1)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, dy, dz, ds = step(s * z + ds * dz - sigma * mu)
        a = 0.99 * min(max_step(s, ds), max_step(z, dz))
        x, y, z, s = x + a * dx, y + a * dy, z + a * dz, s + a * ds
        if not np.all(np.isfinite(x)):
            return "failed", None
        if np.max(np.abs(x), initial=0) > 1e12:
            return "infeasible", None
    return "failed", None
