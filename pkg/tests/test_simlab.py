import numpy as np
import pytest

from eddpc.dataio import NoiseModel
from eddpc.errors import DimensionError
from eddpc.mpqp import CostSpec
from eddpc.pipeline import constraint_spec
from eddpc.runtime import evaluate
from eddpc.simlab import (OL_STABLE, LTIPlant, QuadrotorParams, altitude_plant, bound_hits,
                          build_oracle_controller, collect_altitude_data, feedback_data,
                          is_feasible, overshoot, projected_gradient_solve,
                          reference_qp_solve, rmse_oracle, rmse_zero, settling_time,
                          simulate_lti, simulate_quadrotor, snr_db)
from eddpc.simlab.quadrotor import U1_MIN, quadrotor_rhs, rk4_step, rotor_speed_sum

# --- metrics ---------------------------------------------------------------------


def test_rmse_examples():
    X = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    assert rmse_oracle(X, X) == 0.0
    assert rmse_oracle(X + 1.0, X) == pytest.approx(1.0)
    # channel 1 error 2, channel 2 error 0 -> average 1
    assert rmse_oracle(X + np.array([[2.0], [0.0]]), X) == pytest.approx(1.0)
    assert rmse_zero(np.array([[3.0, 4.0]]), horizon=1) == pytest.approx(3.0)
    assert rmse_zero(np.array([[3.0, 4.0]])) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(DimensionError):
        rmse_oracle(X, X[:1])
    with pytest.raises(DimensionError):
        rmse_oracle(X, X, horizon=5)


def test_snr_example():
    clean = np.ones((2, 100))
    assert snr_db(clean, clean + 0.1) == pytest.approx(20.0)
    assert snr_db([clean, clean], [clean + 0.1, clean + 0.01]) == pytest.approx(30.0)


def test_settling_and_overshoot():
    t = np.arange(6.0)
    y = np.array([0.0, 0.5, 1.2, 0.97, 1.01, 1.0])
    assert settling_time(t, y, 1.0) == 3.0
    assert settling_time(t[:3], [0.0, 0.0, 0.0], 1.0) is None
    assert overshoot(y, 1.0) == pytest.approx(20.0)
    assert overshoot([1.0, 0.2, -0.1], 0.0, start=1.0) == pytest.approx(10.0)
    assert overshoot([0.0], 0.0) == 0.0


def test_bound_hits():
    U = np.array([[1.0, 0.0, -1.0, 0.5]])
    assert bound_hits(U, [-1.0], [1.0]) == pytest.approx(50.0)
    assert bound_hits(np.zeros((1, 0)), [-1.0], [1.0]) == 0.0

# --- linear simulation ------------------------------------------------------------


def test_simulate_open_loop():
    traj = simulate_lti(OL_STABLE, None, [1.0, 1.0], 3)
    x = np.array([1.0, 1.0])
    for t in range(3):
        x = OL_STABLE.A @ x
    np.testing.assert_allclose(traj.states[:, -1], x)
    assert traj.feasible and traj.steps == 3 and traj.times[-1] == 3.0


def test_simulate_infeasible_stops():
    traj = simulate_lti(OL_STABLE, lambda x: None if x[0] < 0.5 else np.array([0.0]),
                        [1.0, 0.0], 20)
    assert traj.status == "infeasible" and "step" in traj.diagnostic
    assert traj.states.shape[1] == traj.steps + 1 < 21
    assert traj.states[0, -1] < 0.5


def test_simulate_noise_is_seeded():
    nm = NoiseModel(0.01 * np.eye(2), seed=3)
    a = simulate_lti(OL_STABLE, lambda x: -x[:1], [1.0, 1.0], 10, noise=nm)
    b = simulate_lti(OL_STABLE, lambda x: -x[:1], [1.0, 1.0], 10, noise=nm)
    np.testing.assert_array_equal(a.states, b.states)
    assert a.noise.shape == (2, 10)
    with pytest.raises(DimensionError):
        simulate_lti(OL_STABLE, None, [1.0], 3)


def test_feedback_data_law():
    plant = LTIPlant([[1.2]], [[1.0]])
    ds = feedback_data(plant, np.ones((1, 5)))
    np.testing.assert_allclose(ds.inputs, -ds.states + 1.0)


def test_plant_validation():
    with pytest.raises(DimensionError):
        LTIPlant(np.eye(2), np.ones((3, 1)))

# --- reference QP -----------------------------------------------------------------


def test_reference_qp_vs_projected_gradient(rand_problem):
    qp = rand_problem[2].qp
    rng = np.random.default_rng(11)
    checked = 0
    for th in rng.uniform(-1.5, 1.5, (60, 3)):
        sol = reference_qp_solve(qp, th)
        assert sol.feasible == is_feasible(qp, th)
        if not sol.feasible:
            continue
        U = projected_gradient_solve(qp, th, iters=200_000, tol=1e-14)
        assert np.abs(U - sol.U).max() <= 1e-6
        checked += 1
    assert checked >= 20


def test_oracle_controller_matches_model_build(ol_config, ol_oracle):
    cost = CostSpec(ol_config.Q, ol_config.R, ol_oracle.terminal.P)
    cons = constraint_spec(ol_config.constraints, 2, 1)
    ctrl = build_oracle_controller(OL_STABLE, cost, cons, ol_config.horizons)
    rng = np.random.default_rng(2)
    for x in rng.uniform(-5, 5, (200, 2)):
        np.testing.assert_allclose(evaluate(ctrl, x).input, evaluate(ol_oracle.controller, x).input,
                                   atol=1e-10)

# --- quadrotor --------------------------------------------------------------------


def test_altitude_plant_is_exact_double_integrator():
    P = altitude_plant(0.1)
    x = P.step(np.array([1.0, 2.0]), np.array([3.0]))
    np.testing.assert_allclose(x, [1.0 + 0.2 + 1.5 * 0.01, 2.3])


def test_hover():
    params = QuadrotorParams()
    x0 = np.zeros(12)
    x0[2] = 1.0
    traj = simulate_quadrotor(params, None, lambda t: np.array([1.0, 0.0, 0.0, 0.0]), 2.0, x0=x0)
    assert np.abs(traj.states[2] - 1.0).max() <= 1e-9
    assert np.abs(traj.states[6:]).max() <= 1e-12
    assert abs(rotor_speed_sum(params, [params.m_mass * params.g, 0, 0, 0])) <= 1e-9


def test_free_fall():
    params = QuadrotorParams()
    x0 = np.zeros(12)
    x0[2] = 10.0
    traj = simulate_quadrotor(params, lambda z, vz, up, r: U1_MIN,
                              lambda t: np.array([0.0, 0.0, 0.0, 0.0]), 0.5, x0=x0)
    t = traj.times[-1]
    assert traj.states[2, -1] == pytest.approx(10.0 - 0.5 * params.g * t * t, abs=1e-9)
    assert traj.states[5, -1] == pytest.approx(-params.g * t, abs=1e-9)
    assert np.all(traj.inputs[0] == 0.0)


def test_rk4_is_fourth_order():
    params = QuadrotorParams()
    f = quadrotor_rhs(params)
    s0 = np.zeros(12)
    s0[6:12] = [0.2, -0.1, 0.3, 1.0, -0.5, 0.7]
    U = np.array([params.m_mass * params.g, 1e-3, -2e-3, 5e-4])

    def integrate(n):
        s = s0.copy()
        for _ in range(n):
            s = rk4_step(f, s, 0.4 / n, U, 0.0)
        return s

    ref = integrate(4096)
    e1 = np.abs(integrate(8) - ref).max()
    e2 = np.abs(integrate(16) - ref).max()
    assert 12.0 <= e1 / e2 <= 20.0


def test_quadrotor_validation():
    with pytest.raises(ValueError):
        QuadrotorParams(m_mass=-1.0)
    with pytest.raises(ValueError, match="on_infeasible"):
        simulate_quadrotor(QuadrotorParams(), None, np.zeros((4, 5)), 0.1, on_infeasible="skip")


def test_collect_altitude_data_shares_inputs():
    runs, clean = collect_altitude_data(QuadrotorParams(), runs=3, T=200, snr_db=35.0, seed=1)
    assert len(runs) == 3
    for ds in runs:
        np.testing.assert_array_equal(ds.inputs, clean.inputs)
        assert ds.T == 200
    assert snr_db([clean.states] * 3, [r.states for r in runs]) == pytest.approx(35.0, abs=1.5)
