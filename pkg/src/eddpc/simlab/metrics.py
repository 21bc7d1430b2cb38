"""Trajectory metrics."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError


def _states(traj):
    return np.atleast_2d(traj.states if hasattr(traj, "states") else np.asarray(traj, dtype=float))


def rmse_oracle(traj, traj_star, horizon: int | None = None) -> float:
    """Channel-averaged RMS distance over ``t = 0..T_v-1`` to the oracle trajectory."""
    X, Xs = _states(traj), _states(traj_star)
    if X.shape[0] != Xs.shape[0]:
        raise DimensionError("trajectories have different state dimensions")
    Tv = horizon if horizon is not None else min(X.shape[1], Xs.shape[1])
    if X.shape[1] < Tv or Xs.shape[1] < Tv:
        raise DimensionError(f"trajectories shorter than the horizon {Tv}")
    D = X[:, :Tv] - Xs[:, :Tv]
    return float(np.mean(np.sqrt(np.mean(D**2, axis=1))))


def rmse_zero(traj, horizon: int | None = None) -> float:
    X = _states(traj)
    Tv = horizon if horizon is not None else X.shape[1]
    return float(np.mean(np.sqrt(np.mean(X[:, :Tv]**2, axis=1))))


def snr_db(clean, noisy) -> float:
    """Average over channels (and datasets) of ``10 log10(sum x^2 / sum v^2)``.

    ``clean`` and ``noisy`` are ``n x samples`` arrays or lists of them.
    """
    if isinstance(clean, (list, tuple)):
        return float(np.mean([snr_db(c, y) for c, y in zip(clean, noisy)]))
    clean = np.atleast_2d(np.asarray(clean, dtype=float))
    noisy = np.atleast_2d(np.asarray(noisy, dtype=float))
    v = noisy - clean
    return float(np.mean(10.0 * np.log10(np.sum(clean**2, axis=1) / np.sum(v**2, axis=1))))


def settling_time(times, signal, target: float, band: float = 0.05):
    """First time after which ``signal`` stays within ``band*|target|`` of ``target``.

    Returns None when the signal is still outside the band at the end.
    """
    times = np.asarray(times, dtype=float)
    err = np.abs(np.asarray(signal, dtype=float) - target)
    outside = np.flatnonzero(err > band * abs(target))
    if outside.size == 0:
        return float(times[0])
    last = outside[-1]
    if last + 1 >= len(times):
        return None
    return float(times[last + 1])


def overshoot(signal, target: float, start: float = 0.0) -> float:
    """Largest excursion beyond ``target`` in percent of the step size."""
    signal = np.asarray(signal, dtype=float)
    step = target - start
    if step == 0:
        return 0.0
    beyond = (signal - target) * np.sign(step)
    return float(max(0.0, beyond.max()) / abs(step) * 100.0)


def bound_hits(inputs, lower, upper, tol: float = 1e-6) -> float:
    """Percentage of steps at which any input channel sits at a bound."""
    U = np.atleast_2d(np.asarray(inputs, dtype=float))
    lower = np.atleast_1d(lower)[:, None]
    upper = np.atleast_1d(upper)[:, None]
    hit = np.any((U >= upper - tol) | (U <= lower + tol), axis=0)
    return float(100.0 * np.mean(hit)) if hit.size else 0.0
