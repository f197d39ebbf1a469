import numpy as np
import pytest

from app.core.logging import setup_logging
from app.core.schemas import GridSpec, InitCase, SchemeParams, StateV
from app.scheme import barenblatt_init, simulate, v_state


@pytest.fixture(autouse=True, scope="session")
def _quiet_logging():
    setup_logging("WARNING")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_state(values) -> StateV:
    values = np.asarray(values, dtype=float)
    return StateV(values=values, grid=GridSpec(n_cells=values.size))


def barenblatt_trajectory(alpha, beta, case, n_cells, tau, n_steps, opts=None):
    grid = GridSpec(n_cells=n_cells)
    params = SchemeParams(alpha=alpha, beta=beta, tau=tau)
    v0 = v_state(barenblatt_init(grid, beta, InitCase(case)), alpha)
    return simulate(v0, params, n_steps, opts)


@pytest.fixture(scope="session")
def fast_trajectory():
    return barenblatt_trajectory(2.0, 0.5, "fast", 32, 1e-4, 40)


@pytest.fixture(scope="session")
def slow_trajectory():
    return barenblatt_trajectory(3.0, 4.0, "slow", 32, 1e-5, 30)
