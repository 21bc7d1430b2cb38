"""Terminal penalty and gain computed from the data-driven surrogates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import _frozen
from .ddrep import DDRep
from .errors import ConvergenceError, DimensionError, StabilityError

METHODS = ("lyapunov", "lqr", "user-supplied")


@dataclass(frozen=True)
class TerminalDesign:
    P: np.ndarray
    K: np.ndarray
    method: str = "user-supplied"

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if P.shape[0] != P.shape[1] or K.shape[1] != P.shape[0]:
            raise DimensionError(f"terminal P {P.shape} and K {K.shape} disagree")
        if np.max(np.abs(P - P.T), initial=0.0) > 1e-9 * max(1.0, np.abs(P).max()):
            raise ValueError("terminal weight P must be symmetric")
        if self.method not in METHODS:
            raise ValueError(f"unknown terminal method {self.method!r}")
        object.__setattr__(self, "P", _frozen(0.5 * (P + P.T)))
        object.__setattr__(self, "K", _frozen(K))


def spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(A)))))


def lyapunov_residual(A, P, Q) -> float:
    return float(np.max(np.abs(A.T @ P @ A + Q - P)))


def solve_dd_lyapunov(rep: DDRep, Q) -> TerminalDesign:
    """Solve ``P = xi' P xi + Q`` by one Kronecker-product linear solve."""
    xi = rep.xi
    n = rep.n
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape != (n, n):
        raise DimensionError(f"Q must be {n} x {n}")
    rho = spectral_radius(xi)
    if rho >= 1.0 - 1e-9:
        raise StabilityError(
            f"spectral radius of xi_d is {rho:.6g} >= 1: the data do not certify open-loop "
            "stability, use the LQR terminal design instead")
    # vec(A' P A) = kron(A', A') vec(P) for row-major vec
    lhs = np.eye(n * n) - np.kron(xi.T, xi.T)
    P = np.linalg.solve(lhs, Q.reshape(-1)).reshape(n, n)
    P = 0.5 * (P + P.T)
    return TerminalDesign(P, np.zeros((rep.m, n)), "lyapunov")


def solve_dd_lqr(rep: DDRep, Q, R, tol: float = 1e-11, max_iter: int = 100_000) -> TerminalDesign:
    """Infinite-horizon LQR on ``(xi_d, gamma_d)`` by Riccati value iteration."""
    A, B = rep.xi, rep.gamma
    n, m = rep.n, rep.m
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionError("Q/R dimensions do not match the representation")
    P = Q.copy()
    for it in range(max_iter):
        BtP = B.T @ P
        gain = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            break
        if np.max(np.abs(P_next - P)) <= tol * max(1.0, np.abs(P_next).max()):
            P = P_next
            K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            if spectral_radius(A + B @ K) >= 1.0:
                raise StabilityError("LQR iteration converged to a non-stabilising gain")
            return TerminalDesign(P, K, "lqr")
        P = P_next
    raise ConvergenceError(
        f"Riccati iteration did not converge in {max_iter} iterations; "
        "(xi_d, gamma_d) may not be stabilisable")


def riccati_residual(A, B, Q, R, P) -> float:
    gain = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return float(np.max(np.abs(Q + A.T @ P @ A - A.T @ P @ B @ gain - P)))


def design_terminal(rep: DDRep, Q, R, method: str = "auto") -> TerminalDesign:
    """Pick Lyapunov when the data certify stability, LQR otherwise (``method='auto'``)."""
    if method == "auto":
        method = "lyapunov" if spectral_radius(rep.xi) < 1.0 - 1e-9 else "lqr"
    if method == "lyapunov":
        return solve_dd_lyapunov(rep, Q)
    if method == "lqr":
        return solve_dd_lqr(rep, Q, R)
    raise ValueError(f"unknown terminal method {method!r}")
