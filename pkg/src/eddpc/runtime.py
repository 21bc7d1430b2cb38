"""Online evaluation of a PWA controller: point location and the affine law."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PreconditionError
from .explicit import PWAController

MEMBERSHIP_SLACK = 1e-9


@dataclass(frozen=True)
class Evaluation:
    input: np.ndarray
    region_index: int


def _theta(ctrl: PWAController, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (ctrl.param_dim,):
        raise DimensionError(f"parameter must have length {ctrl.param_dim}, got {theta.shape}")
    return theta


def locate(ctrl: PWAController, theta, slack: float = MEMBERSHIP_SLACK) -> int | None:
    """Index of the first region (in stored order) containing ``theta``, or None."""
    theta = _theta(ctrl, theta)
    loc = ctrl._locator
    if loc is None:
        return None
    viol = loc["A"] @ theta - loc["b"]
    worst = np.maximum.reduceat(viol, loc["starts"])
    hits = np.flatnonzero(worst <= slack)
    return int(hits[0]) if hits.size else None


def evaluate(ctrl: PWAController, theta, slack: float = MEMBERSHIP_SLACK) -> Evaluation | None:
    """First move ``F1 theta + g1`` of the first region containing ``theta``.

    Returns None when no region contains ``theta`` (infeasible parameter).
    """
    theta = _theta(ctrl, theta)
    i = locate(ctrl, theta, slack)
    if i is None:
        return None
    # first m entries of the sequence law, computed the same way as full_sequence
    seq = ctrl.regions[i].Fseq @ theta + ctrl.regions[i].Gseq
    return Evaluation(seq[:ctrl.input_dim], i)


def evaluate_nearest(ctrl: PWAController, theta) -> Evaluation:
    """Law of the region whose constraints ``theta`` violates least.

    Equals :func:`evaluate` whenever ``theta`` lies in a region.  Outside the
    partition (e.g. a noisy measurement just beyond a state constraint) the
    affine law of the nearest region, in the max-violation sense, is
    extrapolated.
    """
    theta = _theta(ctrl, theta)
    loc = ctrl._locator
    if loc is None:
        raise PreconditionError("controller has no regions")
    worst = np.maximum.reduceat(loc["A"] @ theta - loc["b"], loc["starts"])
    inside = np.flatnonzero(worst <= MEMBERSHIP_SLACK)
    i = int(inside[0]) if inside.size else int(np.argmin(worst))
    seq = ctrl.regions[i].Fseq @ theta + ctrl.regions[i].Gseq
    return Evaluation(seq[:ctrl.input_dim], i)


def full_sequence(ctrl: PWAController, theta, slack: float = MEMBERSHIP_SLACK):
    """Whole optimal sequence at ``theta`` or None when infeasible.

    Regions merged on their first move keep their original pieces; the piece
    containing ``theta`` provides the sequence.
    """
    theta = _theta(ctrl, theta)
    i = locate(ctrl, theta, slack)
    if i is None:
        return None
    reg = ctrl.regions[i]
    law = reg
    if reg.pieces:
        for piece in reg.pieces:
            if piece.region.contains(theta, slack):
                law = piece
                break
    seq = law.Fseq @ theta + law.Gseq
    if law is not reg:
        # keep the first move identical to evaluate()
        seq[:ctrl.input_dim] = (reg.Fseq @ theta + reg.Gseq)[:ctrl.input_dim]
    return seq


def evaluate_tracking(ctrl: PWAController, x, u_prev, r,
                      nearest: bool = False) -> np.ndarray | None:
    """Tracking law: ``u = u_prev + du`` with ``theta = [x; u_prev; r]``.

    Returns None outside the partition unless ``nearest`` is set, in which
    case :func:`evaluate_nearest` supplies ``du``.
    """
    if ctrl.mode != "tracking":
        raise PreconditionError(f"controller mode is {ctrl.mode!r}, expected 'tracking'")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.concatenate([x, u_prev, r])
    res = evaluate_nearest(ctrl, theta) if nearest else evaluate(ctrl, theta)
    if res is None:
        return None
    return u_prev + res.input
