"""Exception hierarchy shared by the lab modules."""

from typing import Optional

import numpy as np


class LabError(Exception):
    """Base class for every error raised by the lab."""


class InvalidArgumentError(LabError, ValueError):
    """A precondition on the inputs is violated."""


class DomainError(InvalidArgumentError):
    """The arguments lie outside the domain of a closed-form expression."""


class DegenerateInputError(LabError):
    """The data carries no usable information (e.g. already at equilibrium)."""


class ConvergenceError(LabError, RuntimeError):
    """The nonlinear solve did not reach its tolerance."""

    def __init__(
        self,
        message: str,
        iterate: np.ndarray,
        residual: float,
        iterations: int,
        step_index: Optional[int] = None,
    ):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index

    def at_step(self, step_index: int) -> "ConvergenceError":
        """Copy of this error tagged with the failing time step."""
        return ConvergenceError(
            f"step {step_index}: {self}",
            iterate=self.iterate,
            residual=self.residual,
            iterations=self.iterations,
            step_index=step_index,
        )


class ScenarioError(LabError):
    """A scenario run failed; wraps the underlying error with run context."""

    def __init__(self, message: str, scenario: str, n_cells: int, tau: float):
        super().__init__(f"[{scenario} N={n_cells} tau={tau:g}] {message}")
        self.scenario = scenario
        self.n_cells = n_cells
        self.tau = tau


class OutputError(LabError):
    """A result file could not be written."""

    def __init__(self, path, cause: Exception):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = str(path)
