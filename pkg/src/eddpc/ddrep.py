"""Data-driven one-step predictor and condensed prediction matrices.

Given noiseless (or averaged) data whose stacked matrix ``[U_{0,1,T}; X_{0,T}]``
has full row rank, the plant satisfies ``x+ = M_d [u; x]`` with
``M_d = X_{1,T} [U_{0,1,T}; X_{0,T}]^+``.  The blocks of ``M_d`` act as
surrogates of ``B`` and ``A`` and are all that is needed to build the
horizon-wide prediction ``X = Xi_d x + Gammabar_d U``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import DataMatrices, _frozen, check_rank_condition
from .errors import DimensionError, PreconditionError, RankConditionError
from .tolerances import DEFAULT_TOLERANCES, ToleranceConfig


@dataclass(frozen=True)
class DDRep:
    predictor: np.ndarray  # n x (m + n), acts on [u; x]

    def __post_init__(self):
        M = _frozen(np.atleast_2d(self.predictor))
        if M.shape[1] <= M.shape[0]:
            raise DimensionError("predictor must be n x (m + n) with m >= 1")
        object.__setattr__(self, "predictor", M)

    @property
    def n(self) -> int:
        return self.predictor.shape[0]

    @property
    def m(self) -> int:
        return self.predictor.shape[1] - self.n

    @property
    def xi(self) -> np.ndarray:
        """State-transition surrogate ``M_d [0; I_n]``."""
        return self.predictor[:, self.m:]

    @property
    def gamma(self) -> np.ndarray:
        """Input surrogate ``M_d [I_m; 0]``."""
        return self.predictor[:, :self.m]

    @classmethod
    def from_model(cls, A, B) -> "DDRep":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        return cls(np.hstack([B, A]))


def right_inverse(M: np.ndarray) -> np.ndarray:
    """Right inverse of a full-row-rank matrix via the SVD pseudoinverse."""
    return np.linalg.pinv(M)


def build_ddrep(dm: DataMatrices, tol: ToleranceConfig = DEFAULT_TOLERANCES,
                check: bool = True) -> DDRep:
    """Build the data-driven predictor ``M_d = X_{1,T} [U; X0]^+``.

    Raises :class:`RankConditionError` when ``[U_{0,1,T}; X_{0,T}]`` is not of
    full row rank ``n + m``; run :func:`eddpc.dataio.check_rank_condition` for
    the underlying singular values.
    """
    if check:
        report = check_rank_condition(dm, tol)
        if not report.is_pe:
            raise RankConditionError(
                f"rank([U01T; X0T]) = {report.rank} < n + m = {report.expected_rank}; "
                "the input is not exciting enough (see check_rank_condition)")
    R = right_inverse(dm.stacked)
    return DDRep(dm.X1T @ R)


def predict_one_step(rep: DDRep, u, x) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u.shape != (rep.m,) or x.shape != (rep.n,):
        raise DimensionError(
            f"expected u of length {rep.m} and x of length {rep.n}, got {u.shape}, {x.shape}")
    return rep.predictor @ np.concatenate([u, x])


@dataclass(frozen=True)
class PredictionMatrices:
    """Stacked prediction ``X = Xi x + Gammabar U`` with ``X = [x(1); ...; x(N_x)]``.

    ``xi``/``gamma`` are the one-step surrogates the matrices were built from;
    the tracking assembly needs them to form its own lifting.
    """

    Xi: np.ndarray
    Gammabar: np.ndarray
    Nx: int
    Nu: int
    Nc: int
    K: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    literal_appendix: bool = False

    def __post_init__(self):
        for name in ("Xi", "Gammabar", "K", "xi", "gamma"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @property
    def m(self) -> int:
        return self.gamma.shape[1]

    @property
    def horizons(self):
        return (self.Nx, self.Nu, self.Nc)

    def state_block(self, k: int):
        """Return ``(Xi_k, Gammabar_k)`` with ``x(k) = Xi_k x + Gammabar_k U`` (k = 0 allowed)."""
        n = self.n
        if k == 0:
            return np.eye(n), np.zeros((n, self.Gammabar.shape[1]))
        return self.Xi[(k - 1) * n:k * n], self.Gammabar[(k - 1) * n:k * n]


def build_prediction_matrices(rep: DDRep, horizons, K=None,
                              literal_appendix: bool = False) -> PredictionMatrices:
    """Condensed prediction matrices over ``N_x`` steps with ``N_u`` free moves.

    For ``k >= N_u`` the input follows ``u(k) = K x(k)`` so the tail of the
    prediction continues from ``x(N_u)`` with the closed-loop matrix
    ``xi + gamma K``.  With ``literal_appendix=True`` the tail blocks are the
    plain powers ``(xi + gamma K)^k`` and the input map is zero-padded instead;
    the two forms coincide when ``N_u == N_x``.
    """
    Nx, Nu, Nc = (int(h) for h in horizons)
    if not (1 <= Nu <= Nx):
        raise PreconditionError(f"horizons must satisfy 1 <= N_u <= N_x, got N_u={Nu}, N_x={Nx}")
    if Nc < 1 or Nc > Nx:
        raise PreconditionError(f"constraint horizon must satisfy 1 <= N_c <= N_x, got {Nc}")
    n, m = rep.n, rep.m
    xi, gamma = rep.xi, rep.gamma
    K = np.zeros((m, n)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (m, n):
        raise DimensionError(f"feedback gain must be {m} x {n}, got {K.shape}")
    xi_K = xi + gamma @ K

    Xi = np.zeros((n * Nx, n))
    Gb = np.zeros((n * Nx, m * Nu))
    power = np.eye(n)
    for k in range(1, Nu + 1):
        power = xi @ power
        Xi[(k - 1) * n:k * n] = power
        for j in range(k):
            Gb[(k - 1) * n:k * n, j * m:(j + 1) * m] = (
                np.linalg.matrix_power(xi, k - 1 - j) @ gamma)
    last_X = Xi[(Nu - 1) * n:Nu * n]
    last_G = Gb[(Nu - 1) * n:Nu * n]
    for k in range(Nu + 1, Nx + 1):
        rows = slice((k - 1) * n, k * n)
        if literal_appendix:
            Xi[rows] = np.linalg.matrix_power(xi_K, k)
        else:
            tail = np.linalg.matrix_power(xi_K, k - Nu)
            Xi[rows] = tail @ last_X
            Gb[rows] = tail @ last_G
    return PredictionMatrices(Xi, Gb, Nx, Nu, Nc, K, xi, gamma, literal_appendix)
