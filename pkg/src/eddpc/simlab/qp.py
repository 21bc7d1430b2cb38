"""Reference QP solvers used as oracles for the explicit controller.

:func:`reference_qp_solve` works directly on ``min U'HU + 2 theta'F U`` subject
to ``G U <= W + E theta`` (the program before completing the squares) and
does not share any code with the region machinery.  Every candidate active
set is solved through the KKT block system; the affine maps from ``theta`` to
``(U, lambda)`` are precomputed once per program and reused.
"""
from __future__ import annotations

import itertools
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import ConvergenceError, DimensionError
from ..mpqp import MpQP

KKT_TOL = 1e-9


@dataclass(frozen=True)
class QPSolution:
    status: str                   # "optimal" | "infeasible"
    U: np.ndarray | None = None
    lam: np.ndarray | None = None  # multipliers with 2HU + 2F'theta + G'lam = 0
    active: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


class _Level:
    """All independent active sets of one size, stacked for batched checks."""

    def __init__(self, qp: MpQP, sets):
        nu, p = qp.nu, qp.p
        k = len(sets[0]) if sets else 0
        self.sets = sets
        S = len(sets)
        dim = nu + k
        K = np.zeros((S, dim, dim))
        K[:, :nu, :nu] = 2.0 * qp.H
        rhs = np.zeros((S, dim, p + 1))
        rhs[:, :nu, :p] = -2.0 * qp.F.T
        if k:
            idx = np.array(sets)
            GA = qp.G[idx]                      # S x k x nu
            K[:, :nu, nu:] = np.transpose(GA, (0, 2, 1))
            K[:, nu:, :nu] = GA
            rhs[:, nu:, :p] = qp.E[idx]
            rhs[:, nu:, p] = qp.W[idx]
        sol = np.linalg.solve(K, rhs)
        self.U_map = sol[:, :nu, :p]
        self.U_off = sol[:, :nu, p]
        self.L_map = sol[:, nu:, :p]
        self.L_off = sol[:, nu:, p]


def _independent_sets(G: np.ndarray, k: int):
    c = G.shape[0]
    out = []
    for combo in itertools.combinations(range(c), k):
        if k == 0:
            out.append(combo)
            continue
        s = np.linalg.svd(G[list(combo)], compute_uv=False)
        if s[0] > 0 and s[-1] > 1e-9 * s[0]:
            out.append(combo)
    return out


class ReferenceQP:
    """Brute-force active-set solver for one program."""

    def __init__(self, qp: MpQP):
        self.qp = qp
        self.levels = []
        for k in range(0, min(qp.nu, qp.c) + 1):
            sets = _independent_sets(qp.G, k)
            if sets:
                self.levels.append(_Level(qp, sets))

    def _search(self, theta, tol):
        qp = self.qp
        rhs = qp.W + qp.E @ theta
        scale = 1.0 + np.abs(rhs)
        for level in self.levels:
            U = level.U_map @ theta + level.U_off           # S x nu
            ok = np.all(U @ qp.G.T <= rhs + tol * scale, axis=1)
            if level.L_off.shape[1]:
                lam = level.L_map @ theta + level.L_off
                ok &= np.all(lam >= -tol * (1.0 + np.abs(lam).max(axis=1, keepdims=True)), axis=1)
            hits = np.flatnonzero(ok)
            if hits.size:
                i = hits[0]
                active = level.sets[i]
                lam_full = np.zeros(qp.c)
                if active:
                    lam_full[list(active)] = level.L_map[i] @ theta + level.L_off[i]
                return QPSolution("optimal", U[i].copy(), lam_full, active)
        return None

    def solve(self, theta) -> QPSolution:
        qp = self.qp
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (qp.p,):
            raise DimensionError(f"parameter must have length {qp.p}")
        for tol in (KKT_TOL, 1e-7):
            sol = self._search(theta, tol)
            if sol is not None:
                return sol
        if not is_feasible(qp, theta):
            return QPSolution("infeasible")
        raise ConvergenceError("no active set satisfies the KKT conditions at a feasible parameter")


def is_feasible(qp: MpQP, theta) -> bool:
    """LP feasibility of ``G U <= W + E theta`` (HiGHS)."""
    if qp.c == 0:
        return True
    res = linprog(np.zeros(qp.nu), A_ub=qp.G, b_ub=qp.W + qp.E @ theta,
                  bounds=[(None, None)] * qp.nu, method="highs")
    return res.status == 0


_CACHE: OrderedDict = OrderedDict()


def reference_solver(qp: MpQP) -> ReferenceQP:
    key = id(qp)
    hit = _CACHE.get(key)
    if hit is not None and hit.qp is qp:
        _CACHE.move_to_end(key)
        return hit
    solver = ReferenceQP(qp)
    _CACHE[key] = solver
    while len(_CACHE) > 8:
        _CACHE.popitem(last=False)
    return solver


def reference_qp_solve(qp: MpQP, theta) -> QPSolution:
    """Optimal sequence ``U`` at ``theta`` or an infeasible verdict.

    Active sets are tried by size, then lexicographically, and the first one
    whose KKT residuals pass (primal slack and multiplier sign within 1e-9)
    is accepted.
    """
    return reference_solver(qp).solve(theta)


def projected_gradient_solve(qp: MpQP, theta, iters: int = 10**6, tol: float = 1e-15):
    """Accelerated projected gradient on the dual, for feasible programs.

    Returns the primal sequence ``U``.  Used as a second, independent oracle.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    Hinv = np.linalg.inv(qp.H)
    q = qp.F.T @ theta
    if qp.c == 0:
        return -Hinv @ q
    h = qp.W + qp.E @ theta
    G = qp.G

    def primal(lam):
        return -Hinv @ (q + 0.5 * G.T @ lam)

    L = 0.5 * np.linalg.norm(G @ Hinv @ G.T, 2)
    lam = np.zeros(qp.c)
    y = lam.copy()
    t = 1.0
    for _ in range(iters):
        lam_next = np.maximum(0.0, y + (G @ primal(y) - h) / L)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = lam_next + ((t - 1.0) / t_next) * (lam_next - lam)
        if np.max(np.abs(lam_next - lam)) <= tol * max(1.0, np.abs(lam_next).max()):
            lam = lam_next
            break
        lam, t = lam_next, t_next
    return primal(lam)
