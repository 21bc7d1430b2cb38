"""Explicit solution of the mp-QP by active-set enumeration.

Each linearly independent active set ``A`` yields an affine optimiser

    z(theta) = H^-1 G_A' (G_A H^-1 G_A')^-1 (W_A + S_A theta)
    U(theta) = z(theta) - H^-1 F' theta

valid on the critical region cut out by dual feasibility of the active
multipliers and primal feasibility of the inactive rows.  Enumerating every
active set, discarding empty or lower-dimensional regions and merging pieces
that share a law gives the piecewise-affine controller.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .dataio import _frozen
from .errors import DimensionError, EnumerationBudgetError, PreconditionError
from .mpqp import MpQP
from .polyhedra import (Polyhedron, chebyshev_ball, is_empty, merge_partition,
                        remove_redundancy, solve_lp)
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig

log = logging.getLogger(__name__)

ENUMERATION_BUDGET = 2 * 10**7


@dataclass(frozen=True)
class ActiveSet:
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise PreconditionError("active-set indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class RegionLaw:
    """One critical region with its affine optimiser.

    ``Fseq``/``Gseq`` give the whole optimal sequence; ``F1``/``g1`` are its
    first ``m`` rows.  ``pieces`` is non-empty only for regions produced by
    merging on the first move, in which case the sequence law is affine on
    each piece separately.
    """

    Fseq: np.ndarray
    Gseq: np.ndarray
    F1: np.ndarray
    g1: np.ndarray
    region: Polyhedron
    active_set: ActiveSet
    center: np.ndarray | None = None
    pieces: tuple = ()

    def __post_init__(self):
        for name in ("Fseq", "Gseq", "F1", "g1"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.center is not None:
            object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def first_move(self, theta) -> np.ndarray:
        return self.F1 @ theta + self.g1

    def sequence(self, theta) -> np.ndarray:
        return self.Fseq @ theta + self.Gseq


@dataclass(frozen=True)
class PWAController:
    regions: tuple
    param_dim: int
    input_dim: int
    mode: str = "regulation"
    provenance: str = "data-driven"
    build_report: dict = field(default_factory=dict)
    qp: MpQP | None = None

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        for r in self.regions:
            if r.region.dim != self.param_dim:
                raise DimensionError("region dimension differs from the controller parameter size")
        object.__setattr__(self, "_locator", _build_locator(self.regions, self.param_dim))

    def __len__(self):
        return len(self.regions)

    @property
    def seq_dim(self) -> int:
        return self.regions[0].Fseq.shape[0] if self.regions else 0


def _build_locator(regions, p):
    # one stacked inequality system for vectorised point location
    if not regions:
        return None
    A_parts, b_parts, starts = [], [], []
    offset = 0
    for r in regions:
        A, b = r.region.A, r.region.b
        if A.shape[0] == 0:
            A, b = np.zeros((1, p)), np.ones(1)
        A_parts.append(A)
        b_parts.append(b)
        starts.append(offset)
        offset += A.shape[0]
    return {"A": np.vstack(A_parts), "b": np.concatenate(b_parts), "starts": np.array(starts)}


# ---------------------------------------------------------------------------


class _Solver:
    """Per-QP quantities shared by all active sets."""

    def __init__(self, qp: MpQP, tol: ToleranceConfig):
        self.qp = qp
        self.tol = tol
        self.Hinv = np.linalg.inv(qp.H)
        self.Hinv = 0.5 * (self.Hinv + self.Hinv.T)
        self.unc_gain = -self.Hinv @ qp.F.T

    def solve(self, active: ActiveSet):
        qp, tol = self.qp, self.tol
        idx = list(active.indices)
        nu, p = qp.nu, qp.p
        if active.size > nu:
            return "degenerate", None
        inactive = np.setdiff1d(np.arange(qp.c), idx)
        if idx:
            Gt = qp.G[idx]
            s = np.linalg.svd(Gt, compute_uv=False)
            if s[0] == 0.0 or s[-1] <= tol.active_rank_rel * s[0]:
                return "degenerate", None
            M = Gt @ self.Hinv @ Gt.T
            try:
                Minv = np.linalg.inv(M)
            except np.linalg.LinAlgError:
                return "degenerate", None
            if not np.all(np.isfinite(Minv)):
                return "degenerate", None
            St, Wt = qp.S[idx], qp.W[idx]
            T = self.Hinv @ Gt.T @ Minv
            zS = T @ St
            zW = T @ Wt
            dual_A = Minv @ St          # lambda >= 0  <=>  Minv St theta <= -Minv Wt
            dual_b = -Minv @ Wt
        else:
            zS = np.zeros((nu, p))
            zW = np.zeros(nu)
            dual_A = np.zeros((0, p))
            dual_b = np.zeros(0)
        Gi = qp.G[inactive]
        prim_A = Gi @ zS - qp.S[inactive]
        prim_b = qp.W[inactive] - Gi @ zW
        region = Polyhedron(np.vstack([dual_A, prim_A]), np.concatenate([dual_b, prim_b]))
        empty, ball = is_empty(region, tol)
        if empty:
            return "empty", None
        region = remove_redundancy(region, tol)
        Fseq = zS + self.unc_gain
        Gseq = zW
        m = qp.m
        law = RegionLaw(Fseq, Gseq, Fseq[:m], Gseq[:m], region, active, ball.center)
        return "region", law


def solve_active_set(qp: MpQP, active, tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Closed-form optimiser and critical region for one active set.

    Returns ``(verdict, law)`` where ``verdict`` is ``"region"``, ``"empty"`` or
    ``"degenerate"`` and ``law`` is a :class:`RegionLaw` only for ``"region"``.
    """
    if not isinstance(active, ActiveSet):
        active = ActiveSet(tuple(sorted(active)))
    return _Solver(qp, tol).solve(active)


def multipliers(qp: MpQP, law: RegionLaw, theta) -> np.ndarray:
    """Full multiplier vector (``H z + G' lambda = 0`` convention) at ``theta``."""
    lam = np.zeros(qp.c)
    idx = list(law.active_set.indices)
    if idx:
        Gt = qp.G[idx]
        Hinv = np.linalg.inv(qp.H)
        M = Gt @ Hinv @ Gt.T
        lam[idx] = -np.linalg.solve(M, qp.W[idx] + qp.S[idx] @ theta)
    return lam


def _conflict_pairs(G: np.ndarray, rel: float):
    """Pairs of rows that are linearly dependent (zero or parallel rows)."""
    c = G.shape[0]
    norms = np.linalg.norm(G, axis=1)
    zero = norms <= rel * max(1.0, norms.max(initial=0.0))
    conflicts = [set() for _ in range(c)]
    for i in range(c):
        for j in range(i + 1, c):
            if zero[i] or zero[j]:
                continue
            cosine = abs(G[i] @ G[j]) / (norms[i] * norms[j])
            if 1.0 - cosine <= rel:
                conflicts[i].add(j)
                conflicts[j].add(i)
    return zero, conflicts


def _combinations(c: int, k: int, banned, conflicts) -> Iterator[tuple]:
    """Size-``k`` subsets of ``range(c)`` in lexicographic order avoiding conflicts."""
    chosen: list = []

    def rec(start):
        if len(chosen) == k:
            yield tuple(chosen)
            return
        for i in range(start, c - (k - len(chosen)) + 1):
            if banned[i] or any(i in conflicts[j] for j in chosen):
                continue
            chosen.append(i)
            yield from rec(i + 1)
            chosen.pop()

    yield from rec(0)


def count_active_sets(c: int, nu: int) -> int:
    return sum(math.comb(c, k) for k in range(0, min(nu, c) + 1))


_WORKER = {}


def _worker_init(qp, tol):
    _WORKER["solver"] = _Solver(qp, tol)


def _worker_chunk(chunk):
    solver = _WORKER["solver"]
    return [solver.solve(ActiveSet(a)) for a in chunk]


def _solve_all(qp, sets, tol, workers):
    if workers <= 1 or len(sets) < 64:
        solver = _Solver(qp, tol)
        return [solver.solve(ActiveSet(a)) for a in sets]
    size = max(16, len(sets) // (8 * workers))
    chunks = [sets[i:i + size] for i in range(0, len(sets), size)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                             initargs=(qp, tol)) as pool:
        out = []
        for part in pool.map(_worker_chunk, chunks):
            out.extend(part)
    return out


def _laws_equal(tol):
    def same(l1, l2):
        return all(a.shape == b.shape and np.max(np.abs(a - b), initial=0.0) <= tol.law_equal
                   for a, b in zip(l1, l2))
    return same


def _grouped_merge(laws: Sequence[RegionLaw], key, tol):
    """Merge regions group by group; groups collect regions with equal ``key`` laws."""
    same = _laws_equal(tol)
    groups: list = []
    for i, law in enumerate(laws):
        k = key(law)
        for g in groups:
            if same(g[0], k):
                g[1].append(i)
                break
        else:
            groups.append((k, [i]))
    out = []
    for k, members in groups:
        if len(members) == 1:
            out.append((members[0], [members[0]], laws[members[0]].region))
            continue
        merged = merge_partition([(laws[i].region, k) for i in members], same, tol)
        for P, _, local in merged:
            glob = [members[j] for j in local]
            out.append((glob[0], glob, P))
    out.sort(key=lambda t: t[0])
    return out


def enumerate_partition(qp: MpQP, tol: ToleranceConfig = DEFAULT_TOLERANCES,
                        merge: str = "sequence", workers: int = 1,
                        budget: int = ENUMERATION_BUDGET) -> PWAController:
    """Build the PWA controller by enumerating active sets of size ``0..nu``.

    Active sets are visited by size, then lexicographically.  Sets containing
    a zero row or two parallel rows are skipped without solving since every
    superset of a dependent set is dependent; they are counted as degenerate.

    ``merge`` selects which regions may be merged: ``"sequence"`` (identical
    full-sequence laws), ``"first_move"`` (identical first move only) or
    ``"none"``.
    """
    c, nu = qp.c, qp.nu
    total = count_active_sets(c, nu)
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} active sets exceed the enumeration budget of {budget}; "
            "shorten the horizons or remove constraints")
    zero, conflicts = _conflict_pairs(qp.G, 1e-12)
    sets = []
    for k in range(0, min(nu, c) + 1):
        sets.extend(_combinations(c, k, zero, conflicts))
    results = _solve_all(qp, sets, tol, workers)
    laws = [law for verdict, law in results if verdict == "region"]
    n_empty = sum(1 for v, _ in results if v == "empty")
    n_degenerate = total - len(laws) - n_empty
    report = {
        "enumerated": total,
        "solved": len(sets),
        "degenerate_skipped": n_degenerate,
        "empty_pruned": n_empty,
        "regions_before_merge": len(laws),
    }
    if merge == "none" or not laws:
        final = laws
    elif merge == "sequence":
        final = []
        for first, members, P in _grouped_merge(laws, lambda l: (l.Fseq, l.Gseq), tol):
            base = laws[first]
            if len(members) > 1:
                base = replace(base, region=P, center=chebyshev_ball(P, tol=tol).center)
            final.append(base)
    elif merge == "first_move":
        final = []
        for first, members, P in _grouped_merge(laws, lambda l: (l.F1, l.g1), tol):
            base = laws[first]
            if len(members) > 1:
                base = replace(base, region=P, center=chebyshev_ball(P, tol=tol).center,
                               pieces=tuple(laws[i] for i in members))
            final.append(base)
    else:
        raise ValueError(f"unknown merge mode {merge!r}")
    report["regions"] = len(final)
    report["merged"] = len(laws) - len(final)
    report["merge_mode"] = merge
    log.info("partition: %s", report)
    return PWAController(tuple(final), qp.p, qp.m, qp.mode, qp.provenance, report, qp)


# ---------------------------------------------------------------------------
# continuity


def _shared_facet_points(Pi: Polyhedron, k: int, Pj: Polyhedron, box: Polyhedron, rng,
                         count: int, tol):
    """Random points on facet ``k`` of ``Pi`` that also lie in ``Pj`` and ``box``.

    Vertices of the pinned polytope are found with random-objective LPs and
    mixed with Dirichlet weights.  Returns an empty list when the
    intersection is empty or lower-dimensional within the facet.
    """
    a, beta = Pi.A[k], Pi.b[k]
    others = np.delete(np.arange(Pi.nrows), k)
    A = np.vstack([Pi.A[others], Pj.A, box.A, a[None, :], -a[None, :]])
    b = np.concatenate([Pi.b[others], Pj.b, box.b, [beta], [-beta]])
    verts = []
    for _ in range(Pi.dim + 1):
        res = solve_lp(rng.standard_normal(Pi.dim), A, b, tol)
        if not res.optimal:
            return []
        verts.append(res.point)
    verts = np.array(verts)
    if np.max(np.ptp(verts, axis=0)) <= 1e-9:
        return []
    return [rng.dirichlet(np.ones(len(verts))) @ verts for _ in range(count)]


def _neighbours(ctrl: PWAController, i: int, k: int, atol: float = 1e-7):
    # regions carrying the same hyperplane with the opposite orientation
    a, beta = ctrl.regions[i].region.A[k], ctrl.regions[i].region.b[k]
    loc = ctrl._locator
    hit = (np.max(np.abs(loc["A"] + a), axis=1) <= atol) & (np.abs(loc["b"] + beta) <= atol)
    owners = np.searchsorted(loc["starts"], np.flatnonzero(hit), side="right") - 1
    return sorted(set(int(j) for j in owners) - {i})


def check_continuity(ctrl: PWAController, samples: int = 200, box=None, seed: int = 0,
                     tol: ToleranceConfig = DEFAULT_TOLERANCES):
    """Largest first-move jump across shared region boundaries.

    For every facet of every region (rows are unit-norm after the build),
    the neighbouring regions are those holding the same hyperplane with the
    opposite sign.  Points are sampled on the facet inside the neighbour
    (and inside ``box``, default ``[-10, 10]^p``) and the two first-move laws
    compared there.  Facets are visited repeatedly until ``samples`` points
    have been checked.  Returns ``(max_mismatch, n_points)``.
    """
    if not ctrl.regions:
        raise PreconditionError("controller has no regions")
    p = ctrl.param_dim
    if box is None:
        box = Polyhedron.box(-10 * np.ones(p), 10 * np.ones(p))
    if len(ctrl.regions) == 1:
        return 0.0, 0
    rng = np.random.default_rng(seed)
    pairs = []
    for i, reg in enumerate(ctrl.regions):
        for k in range(reg.region.nrows):
            pairs.extend((i, k, j) for j in _neighbours(ctrl, i, k) if j > i)
    if not pairs:
        return 0.0, 0
    per_pair = max(1, int(np.ceil(samples / len(pairs))))
    worst, shared = 0.0, 0
    for _ in range(20):
        for i, k, j in pairs:
            ri, rj = ctrl.regions[i], ctrl.regions[j]
            for theta in _shared_facet_points(ri.region, k, rj.region, box, rng, per_pair, tol):
                worst = max(worst, float(np.max(np.abs(ri.first_move(theta) - rj.first_move(theta)))))
                shared += 1
        if shared >= samples or shared == 0:
            break
    return worst, shared
