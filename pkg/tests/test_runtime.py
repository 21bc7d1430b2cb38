import numpy as np
import pytest

from eddpc.errors import DimensionError, PreconditionError
from eddpc.pipeline import BuildConfig, build_controller, build_from_model
from eddpc.runtime import (evaluate, evaluate_nearest, evaluate_tracking, full_sequence,
                           locate)
from eddpc.simlab.qp import reference_qp_solve


@pytest.fixture(scope="module")
def tracking_build():
    cfg = BuildConfig.from_dict({
        "mode": "tracking", "horizons": {"N": 2}, "Q": [1.0], "R": [[0.1]],
        "terminal": {"method": "user-supplied", "P": [1.0]},
        "constraints": {"input_bounds": {"lower": [-1.0], "upper": [1.0]}},
    })
    return build_from_model([[0.5]], [[1.0]], cfg)


def test_single_region_is_affine(ol_data):
    cfg = BuildConfig.from_dict({"horizons": {"N": 2}, "Q": [1.0, 1.0], "R": [[0.1]]})
    res = build_controller(ol_data, cfg)
    r = res.controller.regions[0]
    x = np.array([3.0, -7.0])
    ev = evaluate(res.controller, x)
    assert ev.region_index == 0
    np.testing.assert_allclose(ev.input, r.F1 @ x + r.g1, atol=1e-12)


def test_origin_gives_zero_input(ol_build):
    ev = evaluate(ol_build.controller, [0.0, 0.0])
    assert np.abs(ev.input).max() <= 1e-12


def test_saturated_first_move(ol_build):
    # far from the origin the input bound is active
    assert evaluate(ol_build.controller, [1.0, 1.0]).input[0] == pytest.approx(-2.0, abs=1e-12)
    assert evaluate(ol_build.controller, [-1.0, -1.0]).input[0] == pytest.approx(2.0, abs=1e-12)


def test_infeasible_parameter_returns_none(rand_problem):
    ctrl, qp = rand_problem[2].controller, rand_problem[2].qp
    far = np.array([40.0, -40.0, 40.0])
    assert not reference_qp_solve(qp, far).feasible
    assert evaluate(ctrl, far) is None and locate(ctrl, far) is None
    assert full_sequence(ctrl, far) is None
    # the nearest-region law still returns something
    assert evaluate_nearest(ctrl, far).input.shape == (2,)


def test_nearest_agrees_inside(rand_problem):
    ctrl = rand_problem[2].controller
    rng = np.random.default_rng(3)
    for th in rng.uniform(-1, 1, (200, 3)):
        ev = evaluate(ctrl, th)
        if ev is not None:
            near = evaluate_nearest(ctrl, th)
            assert near.region_index == ev.region_index
            np.testing.assert_array_equal(near.input, ev.input)


def test_first_move_equals_sequence_head(rand_problem):
    ctrl = rand_problem[2].controller
    rng = np.random.default_rng(5)
    for th in rng.uniform(-2, 2, (300, 3)):
        ev = evaluate(ctrl, th)
        if ev is not None:
            np.testing.assert_array_equal(full_sequence(ctrl, th)[:2], ev.input)


def test_wrong_parameter_length(ol_build):
    with pytest.raises(DimensionError):
        evaluate(ol_build.controller, [1.0, 2.0, 3.0])


def test_tracking_steady_state(tracking_build):
    ctrl = tracking_build.controller
    assert ctrl.mode == "tracking" and ctrl.param_dim == 3
    # x = r = 2 with u_prev = 1 is an equilibrium of x+ = 0.5 x + u
    assert evaluate_tracking(ctrl, 2.0, 1.0, 2.0)[0] == pytest.approx(1.0, abs=1e-10)
    # a large step stays within the increment-reconstructed bounds
    u = evaluate_tracking(ctrl, 0.0, 0.0, 5.0)
    assert u is not None and -1.0 - 1e-9 <= u[0] <= 1.0 + 1e-9


def test_tracking_mode_checked(ol_build):
    with pytest.raises(PreconditionError, match="tracking"):
        evaluate_tracking(ol_build.controller, [0.0, 0.0], [0.0], [0.0, 0.0])


def test_tracking_recovers_from_out_of_bounds_input(tracking_build):
    ctrl = tracking_build.controller
    # increments are unbounded, so a previous input beyond the bound is pulled back inside
    u = evaluate_tracking(ctrl, 0.0, 3.0, 0.0)
    assert -1.0 - 1e-9 <= u[0] <= 1.0 + 1e-9
    np.testing.assert_array_equal(evaluate_tracking(ctrl, 0.0, 3.0, 0.0, nearest=True), u)
