"""CSV and text emission for runs, mass-defect tables, region scans and sign maps.

Floats are written with 17 significant digits and rows in a fixed order, so
emitting the same data twice gives byte-identical files.
"""

from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from app.config import settings
from app.core.errors import InvalidArgumentError, LabError, OutputError
from app.core.logging import get_logger
from app.core.schemas import MassDefectRow, RegionScan, RunArtifact, RunResult
from app.analysis import certificate_text
from app.scheme import node_positions
from app.scheme.grid import nonneg_power

logger = get_logger(__name__)

RECORD_COLUMNS = ["k", "t", "mass_u", "mass_v", "H", "F", "P", "ENT", "residual", "newton_iters"]
STATE_COLUMNS = ["k", "i", "x", "u", "v"]


def write_frame(frame: pd.DataFrame, path) -> str:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=settings.float_format, lineterminator="\n")
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return str(path)


def _write_text(text: str, path) -> str:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return str(path)


def records_frame(run: RunResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "k": [r.step_index for r in run.records],
            "t": [r.time for r in run.records],
            "mass_u": [r.mass_u for r in run.records],
            "mass_v": [r.mass_v for r in run.records],
            "H": [r.entropy_H for r in run.records],
            "F": [r.fisher_F for r in run.records],
            "P": [r.production_P for r in run.records],
            "ENT": [r.relative_entropy for r in run.records],
            "residual": [r.residual for r in run.records],
            "newton_iters": [r.newton_iters for r in run.records],
        },
        columns=RECORD_COLUMNS,
    )


def emit_run_csv(run: RunResult, path) -> str:
    written = write_frame(records_frame(run), path)
    run.csv_path = written
    return written


def emit_csv(artifact: RunArtifact, out_dir) -> List[str]:
    """One functional table per run, named after the run."""
    paths = [emit_run_csv(run, Path(out_dir) / f"{run.slug}.csv") for run in artifact.runs]
    artifact.paths["records"] = paths
    logger.info("records_emitted", scenario=artifact.scenario.name, files=len(paths))
    return paths


def states_frame(run: RunResult, stride: int = 1) -> pd.DataFrame:
    if run.trajectory is None:
        raise LabError(f"run {run.slug} carries no trajectory")
    if stride < 1:
        raise InvalidArgumentError(f"stride must be positive, got {stride}")
    traj = run.trajectory
    steps = np.arange(0, traj.n_steps + 1, stride)
    n = traj.grid.n_cells
    v = traj.values[steps]
    return pd.DataFrame(
        {
            "k": np.repeat(steps, n),
            "i": np.tile(np.arange(1, n + 1), steps.size),
            "x": np.tile(node_positions(traj.grid), steps.size),
            "u": nonneg_power(v, 1.0 / traj.params.alpha).reshape(-1),
            "v": v.reshape(-1),
        },
        columns=STATE_COLUMNS,
    )


def emit_states_csv(run: RunResult, path, stride: int = 1) -> str:
    """Long-format nodal values (k, i, x, u, v)."""
    return write_frame(states_frame(run, stride), path)


def emit_certificate(run: RunResult, path) -> str:
    return _write_text(certificate_text(run.certificate), path)


def emit_certificates(artifact: RunArtifact, out_dir) -> List[str]:
    paths = [
        emit_certificate(run, Path(out_dir) / f"{run.slug}.certificate.txt")
        for run in artifact.runs
    ]
    artifact.paths["certificates"] = paths
    return paths


def certificate_frame(artifact: RunArtifact) -> pd.DataFrame:
    """One row per run with every certificate field."""
    rows = []
    for run in artifact.runs:
        row = {"run": run.slug}
        row.update(run.certificate.model_dump())
        rows.append(row)
    return pd.DataFrame(rows)


def mass_defect_frame(rows: Sequence[MassDefectRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in rows],
        columns=["n_cells", "tau", "n_steps", "initial_mass", "final_mass", "defect"],
    )


def emit_mass_defect(rows: Sequence[MassDefectRow], path) -> str:
    return write_frame(mass_defect_frame(rows), path)


def region_frame(scan: RegionScan) -> pd.DataFrame:
    """Row-major over (first, second) axis values."""
    first_name, second_name = scan.axis_names
    first, second = np.meshgrid(scan.first_values, scan.second_values, indexing="ij")
    return pd.DataFrame(
        {
            first_name: first.reshape(-1),
            second_name: second.reshape(-1),
            "min_T": scan.min_t.reshape(-1),
            "min_T_formula": scan.min_t_formula.reshape(-1),
            "shift": scan.shift.reshape(-1),
            "verdict": scan.verdict.reshape(-1),
            "boundary_flag": np.where(scan.boundary_flag.reshape(-1), "true", "false"),
        }
    )


def write_region_csv(scan: RegionScan, path) -> str:
    written = write_frame(region_frame(scan), path)
    logger.info("region_csv_written", path=written, cells=int(scan.verdict.size))
    return written


def sign_map_frame(dense: Dict[str, np.ndarray]) -> pd.DataFrame:
    """Long format over the (X, Y) grid, X varying slowest."""
    X, Y = np.meshgrid(dense["x"], dense["x"], indexing="ij")
    return pd.DataFrame(
        {
            "X": X.reshape(-1),
            "Y": Y.reshape(-1),
            "first_term": dense["first_term"].reshape(-1),
            "shift_term": dense["shift_term"].reshape(-1),
            "T": dense["t"].reshape(-1),
        }
    )


def write_sign_map_csv(dense: Dict[str, np.ndarray], path) -> str:
    written = write_frame(sign_map_frame(dense), path)
    logger.info("sign_map_written", path=written, nodes=int(dense["x"].size))
    return written


def write_artifact(artifact: RunArtifact, out_dir, states: bool = False) -> Dict[str, List[str]]:
    """Records, certificates and optionally nodal states for every run."""
    emit_csv(artifact, out_dir)
    emit_certificates(artifact, out_dir)
    if states:
        artifact.paths["states"] = [
            emit_states_csv(run, Path(out_dir) / f"{run.slug}.states.csv") for run in artifact.runs
        ]
    return artifact.paths
