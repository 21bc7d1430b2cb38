"""Linear benchmark plants and closed-loop simulation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..dataio import Dataset, NoiseModel, _frozen, noise_samples
from ..errors import DimensionError
from ..explicit import PWAController
from ..runtime import evaluate


@dataclass(frozen=True)
class LTIPlant:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError(f"A {A.shape} and B {B.shape} are inconsistent")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u) -> np.ndarray:
        return self.A @ x + self.B @ u


# open-loop stable two-state example
OL_STABLE = LTIPlant([[0.7326, -0.0861], [0.1722, 0.9909]], [[0.0609], [0.0064]])

# unstable plant with a weakly coupled (tridiagonal) structure
SPARSE = LTIPlant([[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]], np.eye(3))


@dataclass
class Trajectory:
    """Closed-loop record.  ``states`` has one more column than ``inputs``."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    references: np.ndarray | None = None
    noise: np.ndarray | None = None
    measured: np.ndarray | None = None
    status: str = "ok"
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states.shape[1] != self.inputs.shape[1] + 1:
            raise DimensionError("states must have exactly one more column than inputs")
        if self.times.shape[0] != self.states.shape[1]:
            raise DimensionError("times must align with the state samples")

    @property
    def steps(self) -> int:
        return self.inputs.shape[1]

    @property
    def feasible(self) -> bool:
        return self.status == "ok"


def _as_policy(controller) -> Callable:
    if controller is None:
        return lambda x, t: None
    if isinstance(controller, PWAController):
        if controller.mode != "regulation":
            raise ValueError("simulate_lti expects a regulation controller")

        def policy(x, t):
            res = evaluate(controller, x)
            return None if res is None else res.input
        return policy
    return lambda x, t: controller(x)


def simulate_lti(plant: LTIPlant, controller, x0, steps: int,
                 noise: NoiseModel | None = None, ts: float = 1.0) -> Trajectory:
    """Run ``x(t+1) = A x(t) + B u(t)`` for ``steps`` steps.

    ``controller`` is a regulation :class:`PWAController`, a callable
    ``x -> u`` (returning None when infeasible) or None for zero input.  With
    ``noise`` the controller sees ``x(t) + v(t)``.  An infeasible step stops
    the run and the partial trajectory is returned with ``status='infeasible'``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (plant.n,):
        raise DimensionError(f"x0 must have length {plant.n}")
    policy = _as_policy(controller)
    v = noise_samples(noise, plant.n, steps) if noise is not None else None
    X = np.zeros((plant.n, steps + 1))
    U = np.zeros((plant.m, steps))
    X[:, 0] = x0
    status, diag = "ok", ""
    done = steps
    for t in range(steps):
        y = X[:, t] + (v[:, t] if v is not None else 0.0)
        if controller is None:
            u = np.zeros(plant.m)
        else:
            u = policy(y, t)
            if u is None:
                status, diag, done = "infeasible", f"no feasible input at step {t}", t
                break
        U[:, t] = u
        X[:, t + 1] = plant.step(X[:, t], U[:, t])
    X, U = X[:, :done + 1], U[:, :done]
    return Trajectory(ts * np.arange(done + 1), X, U,
                      noise=None if v is None else v[:, :done],
                      status=status, diagnostic=diag)


def open_loop_data(plant: LTIPlant, inputs, x0=None) -> Dataset:
    """Noiseless response to the input sequence ``inputs`` (``m x (T+1)``)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    T1 = inputs.shape[1]
    X = np.zeros((plant.n, T1))
    if x0 is not None:
        X[:, 0] = x0
    for t in range(T1 - 1):
        X[:, t + 1] = plant.step(X[:, t], inputs[:, t])
    return Dataset(inputs, X)


def feedback_data(plant: LTIPlant, reference, gain=None, x0=None) -> Dataset:
    """Closed-loop data under ``u = gain x + r`` with ``gain = -I`` by default."""
    reference = np.atleast_2d(np.asarray(reference, dtype=float))
    T1 = reference.shape[1]
    gain = -np.eye(plant.m, plant.n) if gain is None else np.asarray(gain, dtype=float)
    X = np.zeros((plant.n, T1))
    U = np.zeros((plant.m, T1))
    if x0 is not None:
        X[:, 0] = x0
    for t in range(T1):
        U[:, t] = gain @ X[:, t] + reference[:, t]
        if t + 1 < T1:
            X[:, t + 1] = plant.step(X[:, t], U[:, t])
    return Dataset(U, X)
