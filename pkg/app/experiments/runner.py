"""End-to-end runs: Barenblatt data, implicit steps, functionals, certificate."""

from functools import partial
from typing import List, Optional, Sequence, Tuple

from app.config import settings
from app.core.errors import ConvergenceError, InvalidArgumentError, ScenarioError
from app.core.logging import get_logger, run_logger
from app.core.parallel import ordered_map
from app.core.schemas import (
    FunctionalRecord,
    GridSpec,
    MassDefectRow,
    RunArtifact,
    RunResult,
    ScanDomain,
    Scenario,
    SchemeParams,
    SolverOptions,
)
from app.analysis import build_certificate, build_records
from app.inequality.regions import theorem_region_flags
from app.scheme import barenblatt_init, simulate, v_state

logger = get_logger(__name__)

# coarse (X, Y) grid for tagging the run; the full scans live in the region CLI verbs
_TAG_DOMAIN = ScanDomain(resolution=120)


def run_grid(
    scenario: Scenario,
    n_cells: int,
    tau: float,
    opts: Optional[SolverOptions] = None,
    in_region_s: Optional[bool] = None,
) -> RunResult:
    """One (N, tau) run of the scenario."""
    grid = GridSpec(n_cells=n_cells)
    params = SchemeParams(
        alpha=scenario.alpha, beta=scenario.beta, tau=tau, in_region_s=in_region_s
    )
    n_steps = scenario.steps_for(tau)

    u0 = barenblatt_init(grid, scenario.beta, scenario.case)
    try:
        trajectory = simulate(v_state(u0, scenario.alpha), params, n_steps, opts)
    except ConvergenceError as exc:
        raise ScenarioError(str(exc), scenario.name, n_cells, tau) from exc

    records = build_records(trajectory)
    certificate = build_certificate(trajectory, records, scenario.eps)
    run_logger(__name__, scenario.name, n_cells, tau).info(
        "run_completed",
        n_steps=n_steps,
        final_mass=records[-1].mass_u,
        floor_steps=sum(d.floor_applied for d in trajectory.diagnostics),
        bound_pass=certificate.bound_pass,
    )
    return RunResult(
        scenario_name=scenario.name,
        n_cells=n_cells,
        tau=tau,
        n_steps=n_steps,
        params=params,
        records=records,
        certificate=certificate,
        trajectory=trajectory,
    )


def _run_task(task: Tuple[int, float], scenario: Scenario, opts, in_region_s) -> RunResult:
    n_cells, tau = task
    return run_grid(scenario, n_cells, tau, opts, in_region_s)


def run_scenario(
    scenario: Scenario,
    opts: Optional[SolverOptions] = None,
    workers: int = settings.workers,
    domain: Optional[ScanDomain] = None,
) -> RunArtifact:
    """Every (N, tau) pair of the scenario, in (N, tau) order."""
    _, in_s = theorem_region_flags(scenario.alpha, scenario.beta, scenario.eps, domain or _TAG_DOMAIN)
    if not in_s:
        logger.warning(
            "scenario_outside_admissible_region",
            scenario=scenario.name,
            alpha=scenario.alpha,
            beta=scenario.beta,
        )
    tasks = [(n, tau) for n in scenario.n_cells for tau in scenario.taus]
    runs = ordered_map(
        partial(_run_task, scenario=scenario, opts=opts, in_region_s=in_s), tasks, workers
    )
    return RunArtifact(scenario=scenario, runs=runs)


def mass_defect(records: Sequence[FunctionalRecord]) -> float:
    """Final minus initial u-mass."""
    return records[-1].mass_u - records[0].mass_u


def mass_defect_rows(runs: Sequence[RunResult]) -> List[MassDefectRow]:
    return [
        MassDefectRow(
            n_cells=run.n_cells,
            tau=run.tau,
            n_steps=run.n_steps,
            initial_mass=run.records[0].mass_u,
            final_mass=run.records[-1].mass_u,
            defect=mass_defect(run.records),
        )
        for run in runs
    ]


def check_study_grid(scenario: Scenario) -> None:
    if len(set(scenario.n_cells)) < 2 or len(set(scenario.taus)) < 2:
        raise InvalidArgumentError(
            "mass defect study needs at least two grid sizes and two time steps"
        )


def mass_defect_study(
    scenario: Scenario,
    opts: Optional[SolverOptions] = None,
    artifact: Optional[RunArtifact] = None,
    workers: int = settings.workers,
) -> List[MassDefectRow]:
    """Mass defect over the scenario's (N, tau) product; reuses an artifact when given."""
    check_study_grid(scenario)
    if artifact is None:
        artifact = run_scenario(scenario, opts, workers)
    rows = mass_defect_rows(artifact.runs)
    logger.info("mass_defect_study_completed", scenario=scenario.name, rows=len(rows))
    return rows
