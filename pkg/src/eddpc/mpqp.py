"""Condensed multi-parametric QP for regulation and offset-free tracking.

The program is ``min_U U'HU + 2 theta'FU`` subject to ``GU <= W + E theta``.
After completing the squares with ``z = U + H^{-1}F' theta`` it becomes
``min_z z'Hz`` subject to ``Gz <= W + S theta`` with ``S = E + G H^{-1} F'``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataio import _frozen
from .ddrep import PredictionMatrices
from .errors import DimensionError, NotPositiveDefiniteError, PreconditionError


def _as2d(a, rows=None):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a[None, :] if rows is None else a.reshape(rows, -1)
    return a


@dataclass(frozen=True)
class CostSpec:
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        Q, R, P = (_frozen(_as2d(getattr(self, k))) for k in ("Q", "R", "P"))
        for name, M in (("Q", Q), ("R", R), ("P", P)):
            if M.shape[0] != M.shape[1]:
                raise DimensionError(f"{name} must be square")
            if np.max(np.abs(M - M.T)) > 1e-10:
                raise PreconditionError(f"{name} must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-10 or np.min(np.linalg.eigvalsh(P)) < -1e-10:
            raise PreconditionError("Q and P must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) < 1e-10:
            raise PreconditionError("R must be positive definite")
        if Q.shape != P.shape:
            raise DimensionError("Q and P must have the same size")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class ConstraintSpec:
    """Stage constraints ``Cx x(k) + Cu u(k) <= d`` for ``k < N_c``."""

    Cx: np.ndarray
    Cu: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        d = _frozen(np.atleast_1d(np.asarray(self.d, dtype=float)).ravel())
        q = d.shape[0]
        Cx = np.asarray(self.Cx, dtype=float)
        Cu = np.asarray(self.Cu, dtype=float)
        if q:
            # a flat row is accepted for a single constraint
            Cx, Cu = (M.reshape(1, -1) if M.ndim == 1 and q == 1 else M for M in (Cx, Cu))
            if Cx.ndim != 2 or Cu.ndim != 2 or Cx.shape[0] != q or Cu.shape[0] != q:
                raise DimensionError("Cx, Cu and d must have the same number of rows")
        Cx, Cu = _frozen(Cx), _frozen(Cu)
        object.__setattr__(self, "Cx", Cx)
        object.__setattr__(self, "Cu", Cu)
        object.__setattr__(self, "d", d)

    @property
    def q(self) -> int:
        return self.d.shape[0]

    @classmethod
    def unconstrained(cls, n: int, m: int) -> "ConstraintSpec":
        return cls(np.zeros((0, n)), np.zeros((0, m)), np.zeros(0))

    @classmethod
    def input_box(cls, n: int, lower, upper) -> "ConstraintSpec":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        m = lower.size
        Cu = np.vstack([np.eye(m), -np.eye(m)])
        return cls(np.zeros((2 * m, n)), Cu, np.concatenate([upper, -lower]))

    def stack(self, other: "ConstraintSpec") -> "ConstraintSpec":
        return ConstraintSpec(np.vstack([self.Cx, other.Cx]), np.vstack([self.Cu, other.Cu]),
                              np.concatenate([self.d, other.d]))


@dataclass(frozen=True)
class MpQP:
    """Condensed mp-QP; ``F`` is ``p x nu`` and ``S`` already folds ``E``."""

    H: np.ndarray
    F: np.ndarray
    G: np.ndarray
    W: np.ndarray
    E: np.ndarray
    S: np.ndarray
    m: int
    provenance: str = "data-driven"
    mode: str = "regulation"

    def __post_init__(self):
        for name in ("H", "F", "G", "W", "E", "S"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def nu(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.F.shape[0]

    @property
    def c(self) -> int:
        return self.G.shape[0]

    def unconstrained_gain(self) -> np.ndarray:
        """``-H^{-1} F'``: the optimal sequence when no constraint is active."""
        return -np.linalg.solve(self.H, self.F.T)

    def recover_inputs(self, z, theta) -> np.ndarray:
        return np.asarray(z, dtype=float) - np.linalg.solve(self.H, self.F.T @ np.asarray(theta))


def _check_pd(H):
    H = 0.5 * (H + H.T)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "Hessian is not positive definite (check R, or a rank-deficient prediction map)"
        ) from None
    return H


def complete_squares(H, F, G, W, E, m: int, provenance="data-driven", mode="regulation") -> MpQP:
    """Fold the cross term into the constraints: ``S = E + G H^{-1} F'``."""
    H = _check_pd(np.asarray(H, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    G = np.asarray(G, dtype=float).reshape(-1, H.shape[0])
    E = np.asarray(E, dtype=float).reshape(G.shape[0], F.shape[0])
    W = np.asarray(W, dtype=float).ravel()
    S = E + G @ np.linalg.solve(H, F.T)
    return MpQP(H, F, G, W, E, S, m, provenance, mode)


def _stage_weights(cost: CostSpec, K, Nx, Nu):
    n = cost.Q.shape[0]
    QK = cost.Q + K.T @ cost.R @ K
    blocks = []
    for k in range(1, Nx + 1):
        if k == Nx:
            blocks.append(cost.P)
        elif k < Nu:
            blocks.append(cost.Q)
        else:
            blocks.append(QK)
    Qbar = np.zeros((n * Nx, n * Nx))
    for k, Bk in enumerate(blocks):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = Bk
    return Qbar


def _check_dims(pm: PredictionMatrices, cost: CostSpec, cons: ConstraintSpec):
    n, m = pm.n, pm.m
    if cost.Q.shape != (n, n) or cost.R.shape != (m, m):
        raise DimensionError(f"cost weights do not match n={n}, m={m}")
    if cons.q and (cons.Cx.shape[1] != n or cons.Cu.shape[1] != m):
        raise DimensionError(f"constraint matrices do not match n={n}, m={m}")


def assemble_regulation(pm: PredictionMatrices, cost: CostSpec, cons: ConstraintSpec,
                        K=None, provenance: str = "data-driven") -> MpQP:
    """Regulation mp-QP in the parameter ``x = x(0)``.

    Stage constraints are stacked for ``k = 0..N_c-1``; for ``k >= N_u`` the
    input is replaced by the terminal law ``u(k) = K x(k)``.
    """
    _check_dims(pm, cost, cons)
    n, m = pm.n, pm.m
    Nx, Nu, Nc = pm.horizons
    K = pm.K if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    nu = m * Nu

    Qbar = _stage_weights(cost, K, Nx, Nu)
    Rbar = np.kron(np.eye(Nu), cost.R)
    Gb, Xi = pm.Gammabar, pm.Xi
    H = Rbar + Gb.T @ Qbar @ Gb
    F = Xi.T @ Qbar @ Gb

    G_rows, W_rows, E_rows = [], [], []
    for k in range(Nc):
        Xk, Gk = pm.state_block(k)
        if k < Nu:
            sel = np.zeros((m, nu))
            sel[:, k * m:(k + 1) * m] = np.eye(m)
            Gk_total = cons.Cx @ Gk + cons.Cu @ sel
            Ek = -cons.Cx @ Xk
        else:
            CK = cons.Cx + cons.Cu @ K
            Gk_total = CK @ Gk
            Ek = -CK @ Xk
        G_rows.append(Gk_total)
        E_rows.append(Ek)
        W_rows.append(cons.d)
    G = np.vstack(G_rows) if G_rows else np.zeros((0, nu))
    E = np.vstack(E_rows) if E_rows else np.zeros((0, n))
    W = np.concatenate(W_rows) if W_rows else np.zeros(0)
    return complete_squares(H, F, G, W, E, m, provenance, "regulation")


def tracking_lifting(pm: PredictionMatrices):
    """Affine maps of the tracking problem in ``theta = [x; u_prev; r]``.

    Returns ``(Phi, Psi, Ufix, Udelta)`` with predicted states
    ``X = Phi theta + Psi dU`` (``X`` stacked over ``k = 1..N_x``) and inputs
    ``u(k) = Ufix_k theta + Udelta_k dU`` for ``k = 0..N_x-1``; the input is
    held at ``u(N_u-1)`` afterwards.
    """
    n, m = pm.n, pm.m
    Nx, Nu, _ = pm.horizons
    p = 2 * n + m
    xi, gamma = pm.xi, pm.gamma
    Ufix = np.zeros((m * Nx, p))
    Udelta = np.zeros((m * Nx, m * Nu))
    for k in range(Nx):
        Ufix[k * m:(k + 1) * m, n:n + m] = np.eye(m)
        for j in range(min(k, Nu - 1) + 1):
            Udelta[k * m:(k + 1) * m, j * m:(j + 1) * m] = np.eye(m)
    # x(k) = xi^k x + sum_j xi^{k-1-j} gamma u(j)
    Phi = np.zeros((n * Nx, p))
    Psi = np.zeros((n * Nx, m * Nu))
    Ax = np.eye(n)
    for k in range(1, Nx + 1):
        Ax = xi @ Ax
        rows = slice((k - 1) * n, k * n)
        Phi[rows, :n] = Ax
        for j in range(k):
            Bj = np.linalg.matrix_power(xi, k - 1 - j) @ gamma
            Phi[rows] += Bj @ Ufix[j * m:(j + 1) * m]
            Psi[rows] += Bj @ Udelta[j * m:(j + 1) * m]
    return Phi, Psi, Ufix, Udelta


def assemble_tracking(pm: PredictionMatrices, cost: CostSpec, cons: ConstraintSpec,
                      provenance: str = "data-driven") -> MpQP:
    """Offset-free tracking mp-QP over input increments ``dU``.

    Cost: ``sum_{k=1}^{N_x-1} |x(k)-r|_Q^2 + |x(N_x)-r|_P^2 + sum_k |du(k)|_R^2``
    with the reference frozen over the horizon.  Stage constraints are imposed
    on the reconstructed inputs and predicted states for ``k = 0..N_c``;
    rows that coincide exactly (e.g. input rows once the input is held) are
    kept once.
    """
    _check_dims(pm, cost, cons)
    n, m = pm.n, pm.m
    Nx, Nu, Nc = pm.horizons
    if Nc > Nx:
        raise PreconditionError("constraint horizon exceeds state horizon")
    p = 2 * n + m
    Phi, Psi, Ufix, Udelta = tracking_lifting(pm)
    Rsel = np.zeros((n * Nx, p))
    for k in range(Nx):
        Rsel[k * n:(k + 1) * n, n + m:] = np.eye(n)
    Err = Phi - Rsel  # X - 1 (x) r = Err theta + Psi dU
    Qbar = _stage_weights(cost, np.zeros((m, n)), Nx, Nx)
    H = np.kron(np.eye(Nu), cost.R) + Psi.T @ Qbar @ Psi
    F = Err.T @ Qbar @ Psi

    rows = []
    for k in range(Nc + 1):
        if k == 0:
            Xk_theta = np.zeros((n, p))
            Xk_theta[:, :n] = np.eye(n)
            Xk_d = np.zeros((n, m * Nu))
        else:
            Xk_theta = Phi[(k - 1) * n:k * n]
            Xk_d = Psi[(k - 1) * n:k * n]
        kk = min(k, Nx - 1)
        Uk_theta = Ufix[kk * m:(kk + 1) * m]
        Uk_d = Udelta[kk * m:(kk + 1) * m]
        Gk = cons.Cx @ Xk_d + cons.Cu @ Uk_d
        Ek = -(cons.Cx @ Xk_theta + cons.Cu @ Uk_theta)
        for i in range(cons.q):
            rows.append((Gk[i], cons.d[i], Ek[i]))
    G_list, W_list, E_list = [], [], []
    seen = set()
    for g, w, e in rows:
        key = (tuple(g), float(w), tuple(e))
        if key in seen:
            continue
        seen.add(key)
        G_list.append(g)
        W_list.append(w)
        E_list.append(e)
    G = np.array(G_list).reshape(-1, m * Nu)
    W = np.array(W_list)
    E = np.array(E_list).reshape(-1, p)
    qp = complete_squares(H, F, G, W, E, m, provenance, "tracking")
    return qp


def with_provenance(qp: MpQP, provenance: str) -> MpQP:
    return replace(qp, provenance=provenance)
