from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from app.config import settings


class InitCase(str, Enum):
    SLOW = "slow"
    FAST = "fast"


class MeanKind(str, Enum):
    ARITHMETIC = "arithmetic"
    GEOMETRIC = "geometric"
    CANONICAL = "canonical"


class Verdict(str, Enum):
    ADMISSIBLE = "admissible"
    INADMISSIBLE = "inadmissible"
    BOUNDARY_SUSPECT = "boundary-suspect"


class ScanAxes(str, Enum):
    AB = "ab"
    ALPHABETA = "alphabeta"


def _readonly_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


class GridSpec(BaseModel):
    """Uniform periodic grid on the unit torus."""

    model_config = ConfigDict(frozen=True)

    n_cells: int = Field(..., ge=2)

    @computed_field
    @property
    def h(self) -> float:
        return 1.0 / self.n_cells


class SchemeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=1.0)
    beta: float = Field(..., gt=0.0)
    tau: float = Field(..., gt=0.0)
    # Verdict of the (alpha, beta) region scan, filled in by whoever ran it.
    in_region_s: Optional[bool] = None

    @computed_field
    @property
    def theorem_hypotheses_met(self) -> bool:
        return self.beta >= 1.0 and bool(self.in_region_s)


class SolverOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    residual_tol: float = Field(settings.residual_tol, gt=0.0)
    max_iterations: int = Field(settings.max_iterations, ge=1)
    damping: float = Field(settings.damping, gt=0.0, le=1.0)


class StepDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = 0
    newton_steps: int = 0
    picard_sweeps: int = 0
    residual: float = 0.0
    tolerance: float = 0.0
    # the rounding floor of the residual, not residual_tol (1 + max v_prev), set the tolerance
    floor_applied: bool = False


class _NodalState(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    grid: GridSpec

    @field_validator("values", mode="before")
    @classmethod
    def _as_vector(cls, v):
        arr = _readonly_vector(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError("state entries must be finite")
        if np.any(arr < 0.0):
            raise ValueError(f"state entries must be nonnegative (min={arr.min():.3e})")
        return arr

    @model_validator(mode="after")
    def _match_grid(self):
        if self.values.shape[0] != self.grid.n_cells:
            raise ValueError(
                f"state has {self.values.shape[0]} entries, grid has {self.grid.n_cells} cells"
            )
        return self


class StateV(_NodalState):
    """Nodal values of the transformed variable v = u^alpha."""


class StateU(_NodalState):
    """Nodal values of the physical variable u."""


class Trajectory(BaseModel):
    """States v^0..v^K (rows of `values`) and per-step solver diagnostics."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: GridSpec
    params: SchemeParams
    values: np.ndarray
    diagnostics: List[StepDiagnostics] = []

    @model_validator(mode="after")
    def _shape(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_cells:
            raise ValueError("trajectory values must have shape (n_steps + 1, n_cells)")
        if len(self.diagnostics) != self.values.shape[0] - 1:
            raise ValueError("one diagnostics entry per step is required")
        return self

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    def state(self, k: int) -> StateV:
        return StateV(values=self.values[k], grid=self.grid)


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


class EquilibriumRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    U: float = Field(..., ge=0.0)
    V: float = Field(..., ge=0.0)
    alpha: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def _v_is_u_power(self):
        if not np.isclose(self.V, self.U**self.alpha, rtol=1e-12, atol=0.0):
            raise ValueError("V must equal U**alpha")
        return self

    @classmethod
    def from_mass(cls, U: float, alpha: float) -> "EquilibriumRef":
        return cls(U=U, V=U**alpha, alpha=alpha)


class FunctionalRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    step_index: int = Field(..., ge=0)
    time: float
    entropy_H: float
    relative_entropy: float
    fisher_F: float = Field(..., ge=0.0)
    production_P: float
    production_sbp: float
    # Bound on |production_P - production_sbp| from the step residual and rounding.
    production_tol: float = 0.0
    mass_u: float = Field(..., ge=0.0)
    mass_v: float = Field(..., ge=0.0)
    residual: float = 0.0
    newton_iters: int = 0


# ---------------------------------------------------------------------------
# bakry_emery
# ---------------------------------------------------------------------------


class DecayCertificate(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    tau: float
    eps: float
    n_cells: int
    k_max: int

    C_m_theoretical: float
    C_M_theoretical: float
    C_m_empirical: float
    C_M_empirical: float
    kappa_empirical: float
    kappa0_theoretical: float
    lambda_empirical: float
    eta_empirical: float
    lambda_theoretical: float
    eta_theoretical: float
    fitted_rate: float

    a1_pass: bool
    a2_pass: bool
    a3_pass: bool
    bound_pass: bool
    theoretical_bound_pass: bool
    constants_ordered: bool

    U: float
    min_u: float
    min_weight: float
    informative_steps: int
    insufficient_data: bool
    gamma_range_ok: bool
    theorem_hypotheses_met: bool


class SandwichCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    checked_steps: int
    worst_index: Optional[int] = None
    # largest violation of C_m F <= P <= C_M F, relative to F
    worst_excess: float = 0.0
    min_ratio: Optional[float] = None
    max_ratio: Optional[float] = None


class BoundCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    checked_steps: int
    worst_index: Optional[int] = None
    # max over k of (H_k - floor) / bound_k
    worst_ratio: float = 0.0


# ---------------------------------------------------------------------------
# inequality_lab
# ---------------------------------------------------------------------------


class ABPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    A: float
    B: float


class InequalityConfig(BaseModel):
    """Parameters of T(X, Y): exponents, kappa, shift constant, mean and rho."""

    model_config = ConfigDict(frozen=True)

    ab: ABPoint
    kappa: float = Field(..., ge=0.0)
    eps: float = Field(..., gt=0.0, le=1.0)
    c: float
    rho: float
    mean: MeanKind = MeanKind.CANONICAL
    c_overridden: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        from app.inequality.lab import c_shift

        if self.mean == MeanKind.CANONICAL:
            if self.rho != (self.ab.A + self.ab.B + 1.0) / 3.0:
                raise ValueError("canonical mean requires rho = (A + B + 1) / 3")
        elif self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if not self.c_overridden:
            expected = c_shift(self.ab, self.kappa)
            if not np.isclose(self.c, expected, rtol=1e-12, atol=1e-15):
                raise ValueError("c differs from the closed-form shift; set c_overridden")
        return self


class ScanDomain(BaseModel):
    """Log-spaced (X, Y) grid on [x_min, x_max]^2; X = 1 is always a node."""

    model_config = ConfigDict(frozen=True)

    x_min: float = Field(settings.scan_x_min, gt=0.0)
    x_max: float = Field(settings.scan_x_max, gt=0.0)
    resolution: int = Field(settings.scan_resolution, ge=2)
    tol: float = Field(settings.scan_tol, ge=0.0)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.x_min < 1.0 < self.x_max:
            raise ValueError("scan domain must contain X = 1 strictly inside")
        return self


class ScanMin(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_value: float
    argmin_x: float
    argmin_y: float
    boundary_flag: bool


class CellResult(BaseModel):
    """Verdict for one (A, B) cell of a region scan."""

    model_config = ConfigDict(frozen=True)

    min_t: float
    min_t_formula: float
    shift: float
    shift_formula: float
    verdict: Verdict
    boundary_flag: bool


class RegionScan(BaseModel):
    """Per-cell admissibility verdicts over a rectangular parameter grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    axes: ScanAxes
    first_values: np.ndarray
    second_values: np.ndarray
    eps: float
    resolution: int
    x_min: float
    x_max: float
    tol: float
    min_t: np.ndarray
    min_t_formula: np.ndarray
    shift: np.ndarray
    verdict: np.ndarray
    boundary_flag: np.ndarray

    @model_validator(mode="after")
    def _dims(self):
        shape = (self.first_values.shape[0], self.second_values.shape[0])
        for name in ("min_t", "min_t_formula", "shift", "verdict", "boundary_flag"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        return self

    @property
    def axis_names(self) -> List[str]:
        return ["A", "B"] if self.axes == ScanAxes.AB else ["alpha", "beta"]

    def admissible_mask(self) -> np.ndarray:
        return self.verdict != Verdict.INADMISSIBLE.value


class SbpCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    lhs: float
    rhs: float
    holds: bool


class LocalExpansionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    h_values: List[float]
    scaled_t: List[float]
    target: float
    errors: List[float]
    orders: List[float]
    order: float
    converged: bool


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    alpha: float = Field(..., gt=1.0)
    beta: float = Field(..., gt=0.0)
    case: InitCase
    eps: float = Field(0.25, gt=0.0, le=1.0)
    n_cells: List[int] = Field(..., min_length=1)
    taus: List[float] = Field(..., min_length=1)
    n_steps: Optional[int] = Field(None, ge=0)
    t_final: Optional[float] = Field(None, gt=0.0)

    @field_validator("n_cells")
    @classmethod
    def _cells(cls, v):
        if any(n < 2 for n in v):
            raise ValueError("every grid needs at least 2 cells")
        return v

    @field_validator("taus")
    @classmethod
    def _taus(cls, v):
        if any(t <= 0.0 for t in v):
            raise ValueError("time steps must be positive")
        return v

    @model_validator(mode="after")
    def _case_matches_beta(self):
        if self.case == InitCase.SLOW and not self.beta > 1.0:
            raise ValueError("slow case requires beta > 1")
        if self.case == InitCase.FAST and not 0.0 < self.beta < 1.0:
            raise ValueError("fast case requires 0 < beta < 1")
        if self.case == InitCase.SLOW:
            for tau in self.taus:
                if self.steps_for(tau) * tau > settings.slow_t_end * (1.0 + 1e-9):
                    raise ValueError(
                        f"n_steps * tau exceeds t_end = {settings.slow_t_end:g} for tau = {tau:g}"
                    )
        return self

    def steps_for(self, tau: float) -> int:
        if self.n_steps is not None:
            return self.n_steps
        t_final = self.t_final
        if t_final is None:
            t_final = settings.slow_t_end if self.case == InitCase.SLOW else settings.fast_t_final
        return int(np.floor(t_final / tau + 1e-9))


class RunResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario_name: str
    n_cells: int
    tau: float
    n_steps: int
    params: SchemeParams
    records: List[FunctionalRecord]
    certificate: DecayCertificate
    trajectory: Optional[Trajectory] = Field(None, exclude=True)
    csv_path: Optional[str] = None

    @model_validator(mode="after")
    def _table_length(self):
        if len(self.records) != self.n_steps + 1:
            raise ValueError("record table must hold n_steps + 1 rows")
        return self

    @property
    def slug(self) -> str:
        return f"{self.scenario_name}_N{self.n_cells}_tau{self.tau:g}"


class RunArtifact(BaseModel):
    scenario: Scenario
    runs: List[RunResult]
    paths: Dict[str, List[str]] = {}


class MassDefectRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_cells: int
    tau: float
    n_steps: int
    initial_mass: float
    final_mass: float
    defect: float
