"""Barenblatt initial profiles for the slow and fast diffusion cases."""

from dataclasses import dataclass

import numpy as np

from app.config import settings
from app.core.errors import InvalidArgumentError
from app.core.schemas import GridSpec, InitCase, StateU
from app.scheme.grid import nonneg_power, node_positions


@dataclass(frozen=True)
class BarenblattParams:
    x0: float
    t0: float
    C: float


def barenblatt_params(beta: float, case: InitCase) -> BarenblattParams:
    case = InitCase(case)
    if case == InitCase.SLOW:
        if not beta > 1.0:
            raise InvalidArgumentError(f"slow case requires beta > 1, got {beta}")
        x0, t0 = 0.5, 1e-4
        C = ((beta - 1.0) / (2.0 * beta)) * x0**2 / (settings.slow_t_end + t0) ** (
            2.0 / (beta + 1.0)
        )
        return BarenblattParams(x0=x0, t0=t0, C=C)

    if not 0.0 < beta < 1.0:
        raise InvalidArgumentError(f"fast case requires 0 < beta < 1, got {beta}")
    t0 = 1e-2
    return BarenblattParams(x0=0.5, t0=t0, C=t0 ** ((beta - 1.0) / (beta + 1.0)))


def barenblatt_profile(x: np.ndarray, beta: float, prm: BarenblattParams) -> np.ndarray:
    """Pointwise u^0(x); the positive part is taken before the 1/(beta-1) power."""
    x = np.asarray(x, dtype=float)
    z = prm.C - (beta - 1.0) / (2.0 * beta) * (x - prm.x0) ** 2 / prm.t0 ** (2.0 / (beta + 1.0))
    return nonneg_power(z, 1.0 / (beta - 1.0)) / prm.t0 ** (1.0 / (beta + 1.0))


def support_radius_sq(beta: float, prm: BarenblattParams) -> float:
    """|x - x0|^2 beyond which the slow-case profile vanishes."""
    return 2.0 * beta * prm.C * prm.t0 ** (2.0 / (beta + 1.0)) / (beta - 1.0)


def barenblatt_init(grid: GridSpec, beta: float, case: InitCase) -> StateU:
    prm = barenblatt_params(beta, case)
    values = barenblatt_profile(node_positions(grid), beta, prm)
    return StateU(values=values, grid=grid)
