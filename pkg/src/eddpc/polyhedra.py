"""Halfspace polyhedra ``{theta : A theta <= b}`` and the LP machinery behind them.

All linear programs are solved by :func:`solve_lp`, a dense two-phase revised
simplex using Bland's pivoting rule so that results are reproducible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import linprog

from .dataio import _frozen
from .errors import DimensionError, LPCyclingError
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-9


@dataclass(frozen=True)
class LPResult:
    status: str
    objective: float
    point: np.ndarray | None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _simplex(M, rhs, cost, basis, eligible, max_pivots, tol):
    """Revised simplex with Bland's rule on ``M y = rhs, y >= 0``.

    The basis is refactorised from ``M`` at every pivot so round-off does not
    accumulate.  ``eligible`` masks the columns allowed to enter.  Returns
    ``(status, x_B, duals, entering, direction)``; the last two describe the
    improving ray when the status is unbounded.  ``basis`` is updated in place.
    """
    cscale = 1.0 + np.abs(cost)
    for _ in range(max_pivots):
        lu = lu_factor(M[:, basis], check_finite=False)
        if np.min(np.abs(np.diag(lu[0]))) <= 1e-14:
            raise _Uncertified("singular basis")
        xB = lu_solve(lu, rhs)
        y = lu_solve(lu, cost[basis], trans=1)
        reduced = cost - M.T @ y
        reduced[basis] = 0.0
        candidates = np.flatnonzero(eligible & (reduced < -tol * cscale))
        if candidates.size == 0:
            return OPTIMAL, xB, y, None, None
        col = int(candidates[0])
        w = lu_solve(lu, M[:, col])
        positive = w > _PIVOT_TOL
        if not positive.any():
            return UNBOUNDED, xB, y, col, w
        # snap round-off around zero so degenerate ties are recognised
        xb = np.where(xB > 1e-11 * (1.0 + np.abs(rhs).max()), xB, 0.0)
        ratios = np.full(w.size, np.inf)
        ratios[positive] = xb[positive] / w[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        # Bland's choice among tied rows whose pivot is not tiny
        ties = ties[w[ties] >= 1e-3 * w[ties].max()]
        row = int(min(ties, key=lambda i: basis[i]))
        if w[row] < 1e-3 * w[positive].max():
            # tiny pivot: Harris two-pass choice among rows whose ratio is
            # within the feasibility slack, preferring large pivots
            bound = np.min((xb[positive] + tol) / w[positive])
            ok = np.flatnonzero(positive & (ratios <= bound))
            big = w[ok].max()
            row = int(min(ok[w[ok] >= 0.9 * big], key=lambda i: basis[i]))
        basis[row] = col
    raise LPCyclingError(f"simplex exceeded {max_pivots} pivots")


class _Uncertified(Exception):
    pass


_CERT = 1e-7

# counts of LPs solved in-house and of those handed to the fallback solver
LP_STATS = {"solved": 0, "fallback": 0}


def _dual_simplex_run(A, c, cost, tol, max_pivots):
    """Two-phase simplex on ``A' lam = -c, lam >= 0`` minimising ``cost' lam``.

    Returns ``(status, lam, y, ray)``.  ``status`` is ``"no-dual"`` when phase
    one cannot reach zero; ``ray`` then holds the phase-one multipliers.
    """
    r, p = A.shape
    sign = np.where(c > 0, -1.0, 1.0)  # makes the right-hand side -c nonnegative
    M = np.zeros((p, r + p))
    M[:, :r] = A.T * sign[:, None]
    M[:, r:] = np.eye(p)
    rhs = -c * sign
    basis = list(range(r, r + p))
    eligible = np.zeros(r + p, dtype=bool)
    eligible[:r] = True
    cost1 = np.zeros(r + p)
    cost1[r:] = 1.0
    _, xB, y, _, _ = _simplex(M, rhs, cost1, basis, np.ones(r + p, dtype=bool),
                              max_pivots, tol)
    if float(cost1[basis] @ xB) > 1e3 * tol * (1.0 + np.abs(c).max()):
        return "no-dual", None, None, y * sign
    # artificials left in the basis sit at zero; swap them out where possible
    for i in range(p):
        if basis[i] < r:
            continue
        lu = lu_factor(M[:, basis])
        row = lu_solve(lu, M[:, :r])[i]
        row[[j for j in basis if j < r]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            basis[i] = j
    full_cost = np.concatenate([cost, np.zeros(p)])
    status, xB, y, col, w = _simplex(M, rhs, full_cost, basis, eligible, max_pivots, tol)
    lam = np.zeros(r + p)
    if status == UNBOUNDED:
        lam[basis] = -w
        lam[col] = 1.0
        return UNBOUNDED, lam[:r], None, None
    lam[basis] = xB
    return OPTIMAL, lam[:r], y * sign, None


def _simplex_lp(c, A, b, tol: ToleranceConfig) -> LPResult:
    """In-house simplex applied to the dual ``min b' lam, A' lam = -c, lam >= 0``.

    The basis has one row per decision variable, so at the optimum it is the
    set of active constraints and the simplex multipliers are the primal
    point.  Every verdict is checked against a certificate in the original
    variables.
    """
    r, p = A.shape
    max_pivots = 10 * (r + p) ** 2
    ptol = tol.lp_feas * 1e-2
    bscale = 1.0 + np.abs(b).max()
    cscale = 1.0 + np.abs(c).max()
    status, lam, theta, ray = _dual_simplex_run(A, c, b, ptol, max_pivots)
    if status == "no-dual":
        # no multipliers reproduce -c: the primal is unbounded or infeasible;
        # the dual of the zero-objective problem tells which
        st0, lam0, _, _ = _dual_simplex_run(A, np.zeros(p), b, ptol, max_pivots)
        if st0 == UNBOUNDED:
            ok = (lam0.min() >= -_CERT * np.abs(lam0).max()
                  and np.abs(A.T @ lam0).max() <= _CERT * np.abs(lam0).max() * bscale
                  and b @ lam0 < 0)
            if not ok:
                raise _Uncertified("infeasibility")
            return LPResult(INFEASIBLE, np.inf, None)
        d = ray
        dn = np.abs(d).max()
        if not (dn > 0 and (A @ d).max() <= _CERT * dn and c @ d < -_CERT * dn * cscale):
            raise _Uncertified("unboundedness")
        return LPResult(UNBOUNDED, -np.inf, None)
    if status == UNBOUNDED:
        # a dual ray with b' lam < 0 and A' lam = 0 is a Farkas certificate
        ok = (lam.min() >= -_CERT * np.abs(lam).max()
              and np.abs(A.T @ lam).max() <= _CERT * np.abs(lam).max() * bscale
              and b @ lam < 0)
        if not ok:
            raise _Uncertified("infeasibility")
        return LPResult(INFEASIBLE, np.inf, None)
    obj = float(c @ theta)
    lscale = 1.0 + np.abs(lam).max()
    ok = np.all(A @ theta - b <= 1e-8 * (1.0 + np.abs(b)))
    ok = (ok
          and lam.min() >= -_CERT * lscale
          and np.abs(c + A.T @ lam).max() <= _CERT * cscale * lscale
          and abs(obj + b @ lam) <= _CERT * (1.0 + abs(obj)) * lscale)
    if not ok:
        raise _Uncertified("optimality")
    return LPResult(OPTIMAL, obj, theta)


def _fallback_lp(c, A, b) -> LPResult:
    res = None
    for presolve in (False, True):
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * c.size, method="highs",
                      options={"presolve": presolve})
        if res.status == 0:
            return LPResult(OPTIMAL, float(res.fun), np.asarray(res.x, dtype=float))
        if res.status == 2:
            return LPResult(INFEASIBLE, np.inf, None)
        if res.status == 3:
            return LPResult(UNBOUNDED, -np.inf, None)
    raise LPCyclingError(f"fallback LP solver failed: {res.message}")


def solve_lp(c, A, b, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> LPResult:
    """Minimise ``c' theta`` subject to ``A theta <= b`` with ``theta`` free.

    Two-phase revised simplex with Bland's rule on the dual
    ``min b' lam`` subject to ``A' lam = -c, lam >= 0``; the simplex
    multipliers of the final basis give ``theta``.  Each verdict is checked
    against a certificate in the original variables: a feasible point with
    matching dual multipliers, an improving ray, or a Farkas vector.  If the
    check fails or the pivot guard trips, the LP is handed to HiGHS;
    ``LP_STATS`` counts how often that happens.
    """
    c = np.asarray(c, dtype=float).ravel()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    p = c.size
    if A.size == 0:
        A = A.reshape(0, p)
    if A.ndim != 2 or A.shape[1] != p or A.shape[0] != b.size:
        raise DimensionError(f"inconsistent LP dimensions: c {c.shape}, A {A.shape}, b {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise DimensionError("LP data must be finite")
    if A.shape[0] == 0:
        if np.any(c != 0.0):
            return LPResult(UNBOUNDED, -np.inf, None)
        return LPResult(OPTIMAL, 0.0, np.zeros(p))
    LP_STATS["solved"] += 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            return _simplex_lp(c, A, b, tol)
    except (_Uncertified, LPCyclingError, np.linalg.LinAlgError):
        LP_STATS["fallback"] += 1
        return _fallback_lp(c, A, b)


# ---------------------------------------------------------------------------
# polyhedra


@dataclass(frozen=True)
class Polyhedron:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        if A.size == 0 and not (A.ndim == 2 and A.shape[0] == b.size):
            A = A.reshape(0, 0)
        if A.ndim != 2 or A.shape[0] != b.size:
            raise DimensionError(f"polyhedron rows disagree: A {A.shape}, b {b.shape}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def nrows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        p = lower.size
        return cls(np.vstack([np.eye(p), -np.eye(p)]), np.concatenate([upper, -lower]))

    @classmethod
    def universe(cls, p: int) -> "Polyhedron":
        return cls(np.zeros((0, p)), np.zeros(0))

    def contains(self, theta, slack: float = 1e-9) -> bool:
        if self.nrows == 0:
            return True
        return bool(np.all(self.A @ np.asarray(theta, dtype=float) <= self.b + slack))

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        return Polyhedron(np.vstack([self.A, other.A]), np.concatenate([self.b, other.b]))

    def normalized(self) -> "Polyhedron":
        """Unit-norm rows; vacuous zero rows (``0 <= b``) are dropped.

        Entries below ``1e-12`` in a normalised row are set to zero.  A row
        whose hyperplane lies more than ``1e9`` from the origin is treated as
        a zero row (it is round-off, not geometry).

        A zero row whose right-hand side is below ``-1e-9`` is kept as
        ``0 <= -1`` so that emptiness is preserved.
        """
        norms = np.linalg.norm(self.A, axis=1)
        zero = (norms <= 1e-12) | (np.abs(self.b) > 1e9 * norms)
        keep = ~zero
        A = self.A[keep] / norms[keep, None]
        b = self.b[keep] / norms[keep]
        # entries at round-off level carry no geometry but spoil LP bases
        A = np.where(np.abs(A) > 1e-12, A, 0.0)
        if np.any(zero & (self.b < -1e-9)):
            A = np.vstack([A, np.zeros((1, self.dim))])
            b = np.concatenate([b, [-1.0]])
        return Polyhedron(A, b)


@dataclass(frozen=True)
class ChebyshevBall:
    center: np.ndarray | None
    radius: float


def chebyshev_ball(P: Polyhedron, radius_cap: float = 1.0,
                   tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ChebyshevBall:
    """Largest inscribed ball, with its radius capped at ``radius_cap``.

    The radius variable is free, so the LP is always feasible: a negative
    optimum certifies an empty polyhedron.
    """
    p = P.dim
    if P.nrows == 0:
        return ChebyshevBall(np.zeros(p), radius_cap)
    norms = np.linalg.norm(P.A, axis=1)
    A = np.vstack([np.hstack([P.A, norms[:, None]]),
                   np.concatenate([np.zeros(p), [1.0]])[None, :]])
    b = np.concatenate([P.b, [radius_cap]])
    c = np.zeros(p + 1)
    c[-1] = -1.0
    res = solve_lp(c, A, b, tol)
    if not res.optimal:
        # cannot happen for a free radius bounded above; treat as empty
        return ChebyshevBall(None, -np.inf)
    return ChebyshevBall(res.point[:p], float(res.point[p]))


def is_empty(P: Polyhedron, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Return ``(empty, ball)``; empty means no inscribed ball of radius >= threshold."""
    Pn = P.normalized()
    ball = chebyshev_ball(Pn, tol=tol)
    return ball.radius < tol.chebyshev_radius, ball


def remove_redundancy(P: Polyhedron, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Polyhedron:
    """Drop rows implied by the others.

    Row ``i`` survives when maximising ``a_i theta`` over the remaining rows
    (plus ``a_i theta <= b_i + 1`` to keep the LP bounded) exceeds ``b_i`` by
    more than ``tol.redundancy_margin``.  Rows are processed in order and a
    removed row is no longer used to test later rows, so of two identical rows
    the later one is kept.
    """
    Pn = P.normalized()
    A, b = Pn.A, Pn.b
    r = A.shape[0]
    if r == 0:
        return Pn
    keep = np.ones(r, dtype=bool)
    for i in range(r):
        others = keep.copy()
        others[i] = False
        A_lp = np.vstack([A[others], A[i][None, :]])
        b_lp = np.concatenate([b[others], [b[i] + 1.0]])
        try:
            res = solve_lp(-A[i], A_lp, b_lp, tol)
        except LPCyclingError:
            # keeping a possibly redundant row never changes the point set
            continue
        if not res.optimal:
            # infeasible others: P is empty; leave the row set untouched
            continue
        if -res.objective <= b[i] + tol.redundancy_margin:
            keep[i] = False
    return Polyhedron(A[keep], b[keep])


def _max_over(P: Polyhedron, direction, tol):
    res = solve_lp(-np.asarray(direction), P.A, P.b, tol)
    if res.status == UNBOUNDED:
        return np.inf
    if res.status == INFEASIBLE:
        return -np.inf
    return -res.objective


def envelope(P1: Polyhedron, P2: Polyhedron, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Rows of each polyhedron that are valid for the other one.

    Returns ``(env, loose1, loose2)`` where ``loose`` lists the rows (as
    ``(a, b)`` pairs) that cut into the other polyhedron.
    """
    parts, loose = [], []
    for Pa, Pb in ((P1, P2), (P2, P1)):
        env_rows, cut = [], []
        for a, beta in zip(Pa.A, Pa.b):
            if _max_over(Pb, a, tol) <= beta + 1e-9:
                env_rows.append((a, beta))
            else:
                cut.append((a, beta))
        parts.append(env_rows)
        loose.append(cut)
    rows = parts[0] + parts[1]
    p = P1.dim
    if rows:
        env = Polyhedron(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))
    else:
        env = Polyhedron.universe(p)
    return env, loose[0], loose[1]


def union_is_convex(P1: Polyhedron, P2: Polyhedron,
                    tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Decide whether ``P1 u P2`` is convex; returns ``(convex, envelope)``.

    The union is convex iff it equals the envelope, i.e. iff no full-dimensional
    piece of the envelope violates both a cutting row of ``P1`` and a cutting
    row of ``P2``.  Each pair is checked with a Chebyshev LP.
    """
    P1 = P1.normalized()
    P2 = P2.normalized()
    env, cut1, cut2 = envelope(P1, P2, tol)
    for a1, b1 in cut1:
        for a2, b2 in cut2:
            piece = env.intersect(Polyhedron(np.vstack([-a1, -a2]), np.array([-b1, -b2])))
            empty, _ = is_empty(piece, tol)
            if not empty:
                return False, None
    return True, env


def merge_partition(regions: Sequence, same_law: Callable | None = None,
                    tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Greedy pairwise merging of regions that carry the same affine law.

    ``regions`` is a sequence of ``(Polyhedron, law)`` pairs where ``law`` is a
    tuple of arrays.  Two regions merge when their laws agree within
    ``tol.law_equal`` and their union is convex; the merged region is the
    envelope.  The loop restarts after each merge until no pair qualifies.
    Returns a list of ``(Polyhedron, law, members)`` with ``members`` the
    indices of the input regions absorbed into each output region.
    """
    if same_law is None:
        def same_law(l1, l2):
            return all(np.shape(a) == np.shape(b) and np.max(np.abs(np.asarray(a) - b),
                                                             initial=0.0) <= tol.law_equal
                       for a, b in zip(l1, l2))
    current = [(P, law, [i]) for i, (P, law) in enumerate(regions)]
    merged = True
    while merged:
        merged = False
        for i in range(len(current)):
            for j in range(i + 1, len(current)):
                Pi, li, mi = current[i]
                Pj, lj, mj = current[j]
                if not same_law(li, lj):
                    continue
                convex, env = union_is_convex(Pi, Pj, tol)
                if convex:
                    current[i] = (remove_redundancy(env, tol), li, sorted(mi + mj))
                    del current[j]
                    merged = True
                    break
            if merged:
                break
    return current
