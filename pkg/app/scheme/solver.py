"""Implicit Euler step of the porous-medium scheme written in v = u^alpha.

The nonlinear system is solved in the physical variable u, where it reads

    u_i - v_i^prev u_i^(1 - alpha) - c (L u^beta)_i = 0,    c = alpha tau / h^2,

and L is the periodic second difference. Its Jacobian is an M-matrix, and at
nodes with v_i^prev = 0 the spurious root v_i = 0 of the v-form is absent, so
compactly supported data can spread. Convergence is always measured on the
v-form residual, which is what the scheme prescribes.
"""

from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from app.config import settings
from app.core.errors import ConvergenceError, InvalidArgumentError
from app.core.logging import get_logger
from app.core.schemas import (
    GridSpec,
    SchemeParams,
    SolverOptions,
    StateU,
    StateV,
    StepDiagnostics,
    Trajectory,
)
from app.scheme.grid import nonneg_power, periodic_laplacian, second_difference

logger = get_logger(__name__)

_EPS = np.finfo(float).eps


def u_state(v: StateV, alpha: float) -> StateU:
    return StateU(values=nonneg_power(v.values, 1.0 / alpha), grid=v.grid)


def v_state(u: StateU, alpha: float) -> StateV:
    return StateV(values=nonneg_power(u.values, alpha), grid=u.grid)


def scheme_residual(
    v: np.ndarray, v_prev: np.ndarray, params: SchemeParams, grid: GridSpec
) -> np.ndarray:
    """v - v_prev - (alpha tau / h^2) v^((alpha-1)/alpha) L(v^(beta/alpha))."""
    alpha, beta = params.alpha, params.beta
    c = alpha * params.tau / grid.h**2
    drift = second_difference(nonneg_power(v, beta / alpha), grid)
    return np.asarray(v) - np.asarray(v_prev) - c * nonneg_power(v, (alpha - 1.0) / alpha) * drift


def _validated(v: StateV) -> np.ndarray:
    values = np.asarray(v.values, dtype=float)
    if values.shape != (v.grid.n_cells,):
        raise InvalidArgumentError("state length does not match its grid")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("state contains non-finite entries")
    if np.any(values < 0.0):
        raise InvalidArgumentError(f"state has negative entries (min={values.min():.3e})")
    return values


class _ImplicitSystem:
    """One implicit step, posed in u, for a fixed previous state."""

    def __init__(self, v_prev: np.ndarray, params: SchemeParams, grid: GridSpec, tol: float):
        self.p = v_prev
        self.alpha = params.alpha
        self.beta = params.beta
        self.params = params
        self.grid = grid
        self.c = params.alpha * params.tau / grid.h**2
        self.lap = periodic_laplacian(grid.n_cells)
        self.identity = sparse.identity(grid.n_cells, format="csr")
        self.source_nodes = v_prev > 0.0
        self.tol = tol * (1.0 + float(v_prev.max()))
        self.floor = 1e-30 * max(1.0, float(v_prev.max()) ** (1.0 / params.alpha))

    def initial_guess(self) -> np.ndarray:
        return nonneg_power(self.p, 1.0 / self.alpha)

    def _source(self, u: np.ndarray) -> np.ndarray:
        safe = np.where(self.source_nodes, u, 1.0)
        return np.where(self.source_nodes, self.p * safe ** (1.0 - self.alpha), 0.0)

    def g(self, u: np.ndarray) -> np.ndarray:
        return u - self._source(u) - self.c * (self.lap @ nonneg_power(u, self.beta))

    def v_residual(self, u: np.ndarray) -> np.ndarray:
        return scheme_residual(nonneg_power(u, self.alpha), self.p, self.params, self.grid)

    def tolerance(self, u: np.ndarray) -> float:
        # rounding floor of the residual evaluation itself
        scale = float(np.max(u) ** self.alpha) + 4.0 * self.c * float(
            np.max(nonneg_power(u, self.alpha - 1.0)) * np.max(nonneg_power(u, self.beta))
        )
        return max(self.tol, 64.0 * _EPS * scale)

    def converged(self, u: np.ndarray, tol: float) -> Tuple[bool, float]:
        residual = float(np.max(np.abs(self.v_residual(u))))
        if residual > tol:
            return False, residual
        # a node sitting at zero must not be pulled upward by its neighbours
        zero_nodes = u <= 0.0
        if np.any(zero_nodes) and np.any(self.g(u)[zero_nodes] < -tol):
            return False, residual
        return True, residual

    def jacobian(self, u: np.ndarray) -> sparse.csc_matrix:
        ud = np.maximum(u, self.floor)
        diag = 1.0 + np.where(
            self.source_nodes, (self.alpha - 1.0) * self.p * ud ** (-self.alpha), 0.0
        )
        weights = self.beta * ud ** (self.beta - 1.0)
        return (sparse.diags(diag) - self.c * (self.lap @ sparse.diags(weights))).tocsc()

    def project(self, trial: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Clamp at zero; nodes with a source stay strictly positive."""
        return np.where(
            self.source_nodes, np.maximum(trial, 0.1 * u), np.maximum(trial, 0.0)
        )

    def picard(self, u: np.ndarray, damping: float) -> np.ndarray:
        """Lagged-coefficient sweep (I - c L diag(u^(beta-1))) u_new = v_prev u^(1-alpha)."""
        ud = np.maximum(u, self.floor)
        matrix = (self.identity - self.c * (self.lap @ sparse.diags(ud ** (self.beta - 1.0)))).tocsc()
        rhs = np.where(self.source_nodes, self.p * ud ** (1.0 - self.alpha), 0.0)
        u_new = spsolve(matrix, rhs)
        return self.project((1.0 - damping) * u + damping * u_new, u)


def step(
    v_prev: StateV, params: SchemeParams, opts: Optional[SolverOptions] = None
) -> Tuple[StateV, StepDiagnostics]:
    """Advance one implicit Euler step; returns the new state and solver diagnostics."""
    opts = opts or SolverOptions()
    p = _validated(v_prev)
    system = _ImplicitSystem(p, params, v_prev.grid, opts.residual_tol)

    u = system.initial_guess()
    newton_steps = 0
    picard_sweeps = 0
    while True:
        tol = system.tolerance(u)
        done, residual = system.converged(u, tol)
        if done:
            break
        if newton_steps + picard_sweeps >= opts.max_iterations:
            raise ConvergenceError(
                f"no convergence after {opts.max_iterations} iterations "
                f"(residual {residual:.3e} > {tol:.3e})",
                iterate=nonneg_power(u, params.alpha),
                residual=residual,
                iterations=newton_steps + picard_sweeps,
            )

        g = system.g(u)
        merit = float(np.max(np.abs(g)))
        du = spsolve(system.jacobian(u), -g)

        theta = opts.damping
        accepted = None
        if np.all(np.isfinite(du)):
            while theta >= settings.min_damping:
                trial = system.project(u + theta * du, u)
                if float(np.max(np.abs(system.g(trial)))) < merit or system.converged(
                    trial, system.tolerance(trial)
                )[0]:
                    accepted = trial
                    break
                theta *= 0.5

        if accepted is None:
            logger.debug("picard_fallback", merit=merit, theta=theta)
            u = system.picard(u, opts.damping)
            picard_sweeps += 1
        else:
            u = accepted
            newton_steps += 1

    diagnostics = StepDiagnostics(
        iterations=newton_steps + picard_sweeps,
        newton_steps=newton_steps,
        picard_sweeps=picard_sweeps,
        residual=residual,
        tolerance=tol,
        floor_applied=tol > system.tol,
    )
    logger.debug("step_converged", **diagnostics.model_dump())
    return StateV(values=nonneg_power(u, params.alpha), grid=v_prev.grid), diagnostics


def simulate(
    v0: StateV,
    params: SchemeParams,
    n_steps: int,
    opts: Optional[SolverOptions] = None,
) -> Trajectory:
    """Run n_steps implicit steps from v0."""
    if n_steps < 0:
        raise InvalidArgumentError(f"n_steps must be nonnegative, got {n_steps}")
    _validated(v0)

    rows = [np.asarray(v0.values, dtype=float)]
    diagnostics = []
    v = v0
    for k in range(1, n_steps + 1):
        try:
            v, diag = step(v, params, opts)
        except ConvergenceError as exc:
            logger.error("step_failed", step_index=k, residual=exc.residual, tau=params.tau)
            raise exc.at_step(k) from exc
        rows.append(v.values)
        diagnostics.append(diag)

    values = np.vstack(rows)
    values.setflags(write=False)
    logger.info(
        "simulation_completed",
        n_cells=v0.grid.n_cells,
        n_steps=n_steps,
        tau=params.tau,
        newton_steps=sum(d.newton_steps for d in diagnostics),
        picard_sweeps=sum(d.picard_sweeps for d in diagnostics),
    )
    return Trajectory(grid=v0.grid, params=params, values=values, diagnostics=diagnostics)
