"""Discrete entropy, Fisher information, entropy production and masses."""

import math
from typing import List, Optional, Tuple

import numpy as np

from app.core.errors import InvalidArgumentError
from app.core.schemas import (
    EquilibriumRef,
    FunctionalRecord,
    GridSpec,
    StateU,
    StateV,
    Trajectory,
)
from app.scheme.grid import as_grid_vector, forward_difference, nonneg_power
from app.scheme.solver import u_state

_ROUNDING = 64.0 * np.finfo(float).eps


def _require_entropy_alpha(alpha: float) -> None:
    if not alpha > 1.0:
        raise InvalidArgumentError(f"entropy requires alpha > 1, got {alpha}")


def _require_same_grid(first: StateV, second: StateV) -> None:
    if first.grid != second.grid:
        raise InvalidArgumentError(
            f"grid mismatch: {first.grid.n_cells} vs {second.grid.n_cells} cells"
        )


def gamma_exponent(alpha: float, beta: float) -> float:
    if not alpha > 0.0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    return (alpha + beta - 1.0) / (2.0 * alpha)


def entropy_H(v: StateV, alpha: float, V: float) -> float:
    """h / (alpha - 1) * sum(v_i - V)."""
    _require_entropy_alpha(alpha)
    return v.grid.h / (alpha - 1.0) * math.fsum(np.asarray(v.values) - V)


def rel_entropy(u: StateU, alpha: float, U: float) -> float:
    _require_entropy_alpha(alpha)
    if U < 0.0:
        raise InvalidArgumentError(f"reference mass must be nonnegative, got {U}")
    v = StateV(values=nonneg_power(u.values, alpha), grid=u.grid)
    return entropy_H(v, alpha, U**alpha)


def fisher_F(v: StateV, alpha: float, beta: float) -> float:
    """(1/h) * sum((v_{i+1}^gamma - v_i^gamma)^2), periodic."""
    gamma = gamma_exponent(alpha, beta)
    jumps = forward_difference(nonneg_power(v.values, gamma), v.grid)
    if not np.all(np.isfinite(jumps)):
        raise InvalidArgumentError(f"v^gamma is not finite for gamma = {gamma}")
    return math.fsum(jumps**2) / v.grid.h


def production_P(v_new: StateV, v_old: StateV, alpha: float, tau: float) -> float:
    """-(H(v_new) - H(v_old)) / tau; the reference level cancels."""
    _require_entropy_alpha(alpha)
    _require_same_grid(v_new, v_old)
    if not tau > 0.0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    change = math.fsum(np.asarray(v_new.values) - np.asarray(v_old.values))
    return -v_new.grid.h / ((alpha - 1.0) * tau) * change


def production_sbp(v: StateV, alpha: float, beta: float) -> float:
    """Summed-by-parts product form alpha / ((alpha-1) h) * sum(D v^a)(D v^b)."""
    _require_entropy_alpha(alpha)
    a = (alpha - 1.0) / alpha
    b = beta / alpha
    da = forward_difference(nonneg_power(v.values, a), v.grid)
    db = forward_difference(nonneg_power(v.values, b), v.grid)
    return alpha / ((alpha - 1.0) * v.grid.h) * math.fsum(da * db)


def total_mass_u(v: StateV, alpha: float) -> float:
    if not alpha > 0.0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    return v.grid.h * math.fsum(nonneg_power(v.values, 1.0 / alpha))


def total_mass_v(v: StateV) -> float:
    return v.grid.h * math.fsum(v.values)


def equilibrium_from_state(v: StateV, alpha: float) -> EquilibriumRef:
    """Reference level U = h * sum(v^(1/alpha)) taken from the given state."""
    return EquilibriumRef.from_mass(total_mass_u(v, alpha), alpha)


def poincare_discrete(grid: GridSpec) -> float:
    """Sharp constant C_p = h^2 / (4 sin^2(pi h))."""
    return grid.h**2 / (4.0 * math.sin(math.pi * grid.h) ** 2)


def poincare_wirtinger_sides(z, grid: GridSpec) -> Tuple[float, float]:
    """(h sum z_i^2, C_p h^-1 sum (z_{i+1} - z_i)^2) for a mean-zero vector."""
    arr = as_grid_vector(z, grid, name="z")
    if abs(math.fsum(arr)) > 1e-9 * (1.0 + math.fsum(np.abs(arr))):
        raise InvalidArgumentError("z must have zero mean")
    lhs = grid.h * math.fsum(arr**2)
    rhs = poincare_discrete(grid) / grid.h * math.fsum(forward_difference(arr, grid) ** 2)
    return lhs, rhs


def power_mean_bounds(x: float, y: float, a: float, b: float) -> Tuple[float, float, float]:
    """(x^a-y^a)(x^b-y^b) <= (x^m-y^m)^2 <= (a+b)^2/(4ab) (x^a-y^a)(x^b-y^b), m = (a+b)/2."""
    if x < 0.0 or y < 0.0:
        raise InvalidArgumentError("x and y must be nonnegative")
    if not (a > 0.0 and b > 0.0):
        raise InvalidArgumentError("exponents must be positive")
    m = 0.5 * (a + b)
    lower = (x**a - y**a) * (x**b - y**b)
    mid = (x**m - y**m) ** 2
    upper = (a + b) ** 2 / (4.0 * a * b) * lower
    return lower, mid, upper


def build_records(
    trajectory: Trajectory, equilibrium: Optional[EquilibriumRef] = None
) -> List[FunctionalRecord]:
    """Functional values at every recorded step.

    The reference mass defaults to the u-mass of the final state. Step 0 has
    no predecessor; its production is the product form.
    """
    params = trajectory.params
    alpha, beta, tau = params.alpha, params.beta, params.tau
    states = [trajectory.state(k) for k in range(trajectory.n_steps + 1)]
    if equilibrium is None:
        equilibrium = equilibrium_from_state(states[-1], alpha)

    masses_v = [total_mass_v(v) for v in states]
    records = []
    for k, v in enumerate(states):
        p_sbp = production_sbp(v, alpha, beta)
        if k == 0:
            p_diff, residual, iters, p_tol = p_sbp, 0.0, 0, 0.0
        else:
            diag = trajectory.diagnostics[k - 1]
            p_diff = production_P(v, states[k - 1], alpha, tau)
            residual, iters = diag.residual, diag.iterations
            # residual of the step plus rounding of the mass difference
            p_tol = (residual + _ROUNDING * max(masses_v[k], masses_v[k - 1])) / (
                (alpha - 1.0) * tau
            )
        records.append(
            FunctionalRecord(
                step_index=k,
                time=k * tau,
                entropy_H=entropy_H(v, alpha, equilibrium.V),
                relative_entropy=rel_entropy(u_state(v, alpha), alpha, equilibrium.U),
                fisher_F=fisher_F(v, alpha, beta),
                production_P=p_diff,
                production_sbp=p_sbp,
                production_tol=p_tol,
                mass_u=total_mass_u(v, alpha),
                mass_v=masses_v[k],
                residual=residual,
                newton_iters=iters,
            )
        )
    return records
