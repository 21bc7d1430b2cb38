"""Shared fixtures: the two-state stable benchmark and a random 3-state problem."""
import numpy as np
import pytest

from eddpc.pipeline import BuildConfig, build_controller, build_from_model
from eddpc.simlab.benchmarks import ol_stable_config
from eddpc.simlab.plants import OL_STABLE, LTIPlant, open_loop_data


def random_problem(seed: int = 7):
    """Stable random plant with n=3, m=2, N=2 and six stage constraint rows."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    A *= 0.95 / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.normal(size=(3, 2))
    Cx = rng.normal(size=(2, 3))
    cfg = BuildConfig.from_dict({
        "horizons": {"N": 2}, "Q": [1.0, 1.0, 1.0], "R": [[0.1, 0.0], [0.0, 0.1]],
        "constraints": {"d": [2.0, 2.0], "Cx": Cx.tolist(), "Cu": [[0, 0], [0, 0]],
                        "input_bounds": {"lower": [-1, -1], "upper": [1, 1]}},
    })
    return LTIPlant(A, B), cfg


@pytest.fixture(scope="session")
def ol_data():
    rng = np.random.default_rng(20)
    return open_loop_data(OL_STABLE, rng.uniform(-5, 5, (1, 21)))


@pytest.fixture(scope="session")
def ol_config():
    return ol_stable_config()


@pytest.fixture(scope="session")
def ol_build(ol_data, ol_config):
    return build_controller(ol_data, ol_config)


@pytest.fixture(scope="session")
def ol_oracle(ol_config):
    return build_from_model(OL_STABLE.A, OL_STABLE.B, ol_config)


@pytest.fixture(scope="session")
def rand_problem():
    plant, cfg = random_problem()
    return plant, cfg, build_from_model(plant.A, plant.B, cfg)


# --- acceptance summary: one PASS/FAIL line per criterion, printed after the run

_ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(k: int, ok: bool, detail: str):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
