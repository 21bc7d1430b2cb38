"""Nonlinear quadrotor model with PD attitude loops and an altitude channel.

State ordering: ``[x, y, z, vx, vy, vz, phi, theta, psi, p, q, r]`` with
angles in radians.  Inputs ``U1..U4`` are the collective thrust and the three
torques.  Controllers act at the sampling time ``dt`` (zero-order hold) while
the ODE is integrated with RK4 at ``dt / substeps``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dataio import Dataset, NoiseModel, noise_samples
from ..errors import SimulationError
from ..explicit import PWAController
from ..runtime import evaluate_tracking
from .plants import LTIPlant, Trajectory

U1_MIN, U1_MAX = -9.81, 9.564     # bounds on the gravity-compensated thrust u1
PD_GAINS = (4.0, 2.0, 4.0, 2.0, 4.0, 2.0, 2.0, 2.0)
TS = 0.025


@dataclass(frozen=True)
class QuadrotorParams:
    m_mass: float = 0.5
    Ix: float = 5e-3
    Iy: float = 5e-3
    Iz: float = 9e-3
    Jm: float = 3.4e-5
    d_drag: float = 1.1e-5
    b_thrust: float = 7.2e-5
    l_arm: float = 0.25
    g: float = 9.81

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"quadrotor parameter {name} must be positive, got {value}")


def altitude_plant(ts: float = TS) -> LTIPlant:
    """Double integrator ``z'' = u1`` sampled with a zero-order hold."""
    return LTIPlant([[1.0, ts], [0.0, 1.0]], [[ts**2 / 2.0], [ts]])


def rotor_speed_sum(params: QuadrotorParams, U) -> float:
    """Signed rotor speed sum ``-O1 + O2 - O3 + O4`` from the commanded inputs."""
    b, l, d = params.b_thrust, params.l_arm, params.d_drag
    M = np.array([[b, b, b, b],
                  [0.0, -b * l, 0.0, b * l],
                  [-b * l, 0.0, b * l, 0.0],
                  [-d, d, -d, d]])
    w2 = np.clip(np.linalg.solve(M, U), 0.0, None)
    omega = np.sqrt(w2)
    return float(-omega[0] + omega[1] - omega[2] + omega[3])


def quadrotor_rhs(params: QuadrotorParams) -> Callable:
    m, g = params.m_mass, params.g
    Ix, Iy, Iz, Jm = params.Ix, params.Iy, params.Iz, params.Jm

    def f(s, U, omega_r):
        phi, theta, psi, p, q, r = s[6:12]
        cphi, sphi = np.cos(phi), np.sin(phi)
        cth, sth = np.cos(theta), np.sin(theta)
        cpsi, spsi = np.cos(psi), np.sin(psi)
        U1, U2, U3, U4 = U
        ds = np.empty(12)
        ds[0:3] = s[3:6]
        ds[3] = U1 * (cpsi * cphi * sth + spsi * sphi) / m
        ds[4] = U1 * (spsi * cphi * sth - sphi * cpsi) / m
        ds[5] = U1 * (cth * cphi) / m - g
        ds[9] = (Iy - Iz) / Ix * q * r + U2 / Ix - Jm / Ix * q * omega_r
        ds[10] = (Iz - Ix) / Iy * p * r + U3 / Iy + Jm / Iy * p * omega_r
        ds[11] = (Ix - Iy) / Iz * p * q + U4 / Iz
        ds[6] = p + sphi * np.tan(theta) * q + cphi * np.tan(theta) * r
        ds[7] = cphi * q - sphi * r
        ds[8] = sphi / cth * q + cphi / cth * r
        return ds
    return f


def rk4_step(f, s, h, *args):
    k1 = f(s, *args)
    k2 = f(s + 0.5 * h * k1, *args)
    k3 = f(s + 0.5 * h * k2, *args)
    k4 = f(s + h * k3, *args)
    return s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def euler_rates(s) -> np.ndarray:
    phi, theta = s[6], s[7]
    p, q, r = s[9:12]
    return np.array([
        p + np.sin(phi) * np.tan(theta) * q + np.cos(phi) * np.tan(theta) * r,
        np.cos(phi) * q - np.sin(phi) * r,
        np.sin(phi) / np.cos(theta) * q + np.cos(phi) / np.cos(theta) * r,
    ])


def attitude_torques(params: QuadrotorParams, s, refs, gains=PD_GAINS):
    """PD torques tracking ``(phi_ref, theta_ref, psi_ref)``."""
    _, _, k3, k4, k5, k6, k7, k8 = gains
    rates = euler_rates(s)
    U2 = -params.Ix * (k3 * (s[6] - refs[0]) + k4 * rates[0])
    U3 = -params.Iy * (k5 * (s[7] - refs[1]) + k6 * rates[1])
    U4 = -params.Iz * (k7 * (s[8] - refs[2]) + k8 * rates[2])
    return U2, U3, U4


def flatness_thrust(params: QuadrotorParams, z, vz, z_ref, phi, theta, gains=PD_GAINS):
    k1, k2 = gains[0], gains[1]
    return (params.m_mass * params.g - k1 * (z - z_ref) - k2 * vz) / (np.cos(phi) * np.cos(theta))


def _reference_at(refs, t_index, t):
    if callable(refs):
        return np.asarray(refs(t), dtype=float)
    return np.asarray(refs[:, min(t_index, refs.shape[1] - 1)], dtype=float)


def simulate_quadrotor(params: QuadrotorParams, altitude_controller, refs, duration: float,
                       dt: float = TS, pd_gains=PD_GAINS, x0=None, substeps: int = 10,
                       noise: NoiseModel | None = None, u_prev0: float = 0.0,
                       on_infeasible: str = "stop") -> Trajectory:
    """Closed-loop quadrotor simulation.

    ``refs`` is either a callable ``t -> [z_ref, phi_ref, theta_ref, psi_ref]``
    or a ``4 x steps`` array.  ``altitude_controller`` may be None (the
    flatness-based thrust law), a tracking :class:`PWAController` acting on
    ``u1 = U1/m - g`` with parameter ``[z, vz, u_prev, z_ref, 0]``, or a
    callable ``(z, vz, u_prev, z_ref) -> u1``.  ``noise`` (2 x 2) corrupts the
    measured ``(z, vz)`` fed to the altitude controller.

    When the altitude law has no feasible input (e.g. a noisy altitude
    measurement below the ground constraint) the run stops with
    ``status='infeasible'``.  With ``on_infeasible='hold'`` the previous
    ``u1`` is applied instead; with ``'nearest'`` (PWA controllers only) the
    law of the least-violated region is used.  Such steps are counted in
    ``extra['fallback_steps']``.

    ``extra['u1']`` holds the applied ``u1`` and ``measured`` the noisy
    ``(z, vz)`` samples.
    """
    if on_infeasible not in ("stop", "hold", "nearest"):
        raise ValueError(f"on_infeasible must be 'stop', 'hold' or 'nearest', "
                         f"got {on_infeasible!r}")
    steps = int(round(duration / dt))
    s = np.zeros(12) if x0 is None else np.asarray(x0, dtype=float).copy()
    if s.shape != (12,):
        raise ValueError("quadrotor state must have 12 entries")
    f = quadrotor_rhs(params)
    m, g = params.m_mass, params.g
    v = noise_samples(noise, 2, steps + 1) if noise is not None else np.zeros((2, steps + 1))
    S = np.zeros((12, steps + 1))
    Uall = np.zeros((4, steps))
    u1_log = np.zeros(steps)
    R = np.zeros((4, steps))
    meas = np.zeros((2, steps + 1))
    S[:, 0] = s
    u_prev = float(u_prev0)
    fallbacks = 0
    status, diag, done = "ok", "", steps
    h = dt / substeps
    for k in range(steps):
        t = k * dt
        ref = _reference_at(refs, k, t)
        R[:, k] = ref
        y = s[[2, 5]] + v[:, k]
        meas[:, k] = y
        if altitude_controller is None:
            U1 = flatness_thrust(params, s[2], s[5], ref[0], s[6], s[7], pd_gains)
            u1 = U1 / m - g
        else:
            if isinstance(altitude_controller, PWAController):
                u = evaluate_tracking(altitude_controller, y, [u_prev], [ref[0], 0.0])
                if u is None and on_infeasible == "nearest":
                    u = evaluate_tracking(altitude_controller, y, [u_prev], [ref[0], 0.0],
                                          nearest=True)
                    fallbacks += 1
                u1 = None if u is None else float(u[0])
            else:
                u1 = altitude_controller(y[0], y[1], u_prev, ref[0])
            if u1 is None and on_infeasible == "hold":
                u1, fallbacks = u_prev, fallbacks + 1
            if u1 is None:
                status, diag, done = "infeasible", f"altitude law infeasible at t={t:.3f} s", k
                break
            u1 = float(np.clip(u1, U1_MIN, U1_MAX))
            U1 = m * (u1 + g)
        U2, U3, U4 = attitude_torques(params, s, ref[1:4], pd_gains)
        U = np.array([U1, U2, U3, U4])
        omega_r = rotor_speed_sum(params, U)
        for _ in range(substeps):
            s = rk4_step(f, s, h, U, omega_r)
        if not np.all(np.isfinite(s)) or np.max(np.abs(s[6:8])) > np.pi / 2:
            raise SimulationError(f"quadrotor simulation diverged at t={t:.3f} s")
        Uall[:, k] = U
        u1_log[k] = u1
        u_prev = u1
        S[:, k + 1] = s
    meas[:, done] = S[[2, 5], done] + v[:, done]
    traj = Trajectory(dt * np.arange(done + 1), S[:, :done + 1], Uall[:, :done],
                      references=R[:, :done], noise=v[:, :done + 1],
                      measured=meas[:, :done + 1], status=status, diagnostic=diag)
    traj.extra["u1"] = u1_log[:done]
    traj.extra["fallback_steps"] = fallbacks
    return traj


def collection_references(seed: int, duration: float = 10.0, dt: float = TS,
                          dwell: float = 1.0, z_range=(0.0, 4.0), angle_deg: float = 0.2):
    """Piecewise-constant altitude and attitude set points for data collection."""
    rng = np.random.default_rng(seed)
    steps = int(round(duration / dt))
    per = max(1, int(round(dwell / dt)))
    blocks = -(-steps // per)
    z = rng.uniform(*z_range, size=blocks)
    angles = np.deg2rad(rng.uniform(-angle_deg, angle_deg, size=(2, blocks)))
    R = np.zeros((4, steps))
    R[0] = np.repeat(z, per)[:steps]
    R[1:3] = np.repeat(angles, per, axis=1)[:, :steps]
    return R


def collect_altitude_data(params: QuadrotorParams, runs: int = 10, T: int = 400,
                          snr_db: float = 35.0, seed: int = 0, dt: float = TS):
    """Closed-loop experiments sharing one input sequence.

    The flatness law drives the true altitude, so every run has the same
    inputs and the same true ``(z, vz)``; only the measurement noise differs.
    Returns ``(runs, clean)`` where ``clean`` is the noiseless dataset.
    """
    refs = collection_references(seed, duration=(T + 1) * dt, dt=dt)
    traj = simulate_quadrotor(params, None, refs, duration=(T + 1) * dt, dt=dt)
    u1 = traj.extra["u1"][:T + 1]
    X = traj.states[[2, 5], :T + 1]
    clean = Dataset(u1[None, :], X)
    power = np.mean(X**2, axis=1)
    std = np.sqrt(power / 10.0**(snr_db / 10.0))
    out = []
    for k in range(runs):
        noise = NoiseModel(np.diag(std**2), seed=seed * 100_003 + k + 1)
        out.append(Dataset(clean.inputs, X + noise_samples(noise, 2, T + 1)))
    return out, clean
