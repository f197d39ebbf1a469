from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.analysis import build_records
from app.analysis.functionals import entropy_H
from app.core.errors import InvalidArgumentError, ScenarioError
from app.core.schemas import InitCase, ScanDomain, SchemeParams, SolverOptions
from app.experiments.export import (
    RECORD_COLUMNS,
    STATE_COLUMNS,
    emit_csv,
    emit_mass_defect,
    emit_states_csv,
    region_frame,
    write_artifact,
)
from app.experiments.runner import (
    check_study_grid,
    mass_defect,
    mass_defect_study,
    run_grid,
    run_scenario,
)
from app.experiments.scenarios import (
    PRESETS,
    fast_scenario,
    load_scenario,
    parse_overrides,
    scenario_from_mapping,
    slow_scenario,
)
from app.inequality.regions import region_scan_ab
from app.scheme import simulate
from tests.conftest import make_state

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="module")
def small_fast():
    return fast_scenario(n_cells=[16, 24], taus=[1e-4, 2e-4], n_steps=8)


@pytest.fixture(scope="module")
def small_artifact(small_fast):
    return run_scenario(small_fast)


def test_presets():
    assert set(PRESETS) == {"fast", "slow", "outside_slow", "outside_fast"}
    slow = slow_scenario()
    assert (slow.alpha, slow.beta, slow.case) == (3.0, 4.0, InitCase.SLOW)
    fast = fast_scenario()
    assert (fast.alpha, fast.beta, fast.case) == (2.0, 0.5, InitCase.FAST)
    assert fast.steps_for(1e-4) == 500
    assert slow.steps_for(1e-5) == 50


def test_slow_scenario_must_stop_before_the_support_reaches_the_boundary():
    with pytest.raises(ValidationError):
        slow_scenario(taus=[1e-4], n_steps=10)
    assert slow_scenario(taus=[1e-4], n_steps=5).steps_for(1e-4) == 5


def test_case_must_match_beta():
    with pytest.raises(ValidationError):
        fast_scenario(beta=2.0)


def test_parse_overrides():
    assert parse_overrides(["Alpha=2.5", " taus = 1e-4 "]) == {"alpha": "2.5", "taus": "1e-4"}
    with pytest.raises(InvalidArgumentError):
        parse_overrides(["alpha"])
    with pytest.raises(InvalidArgumentError):
        parse_overrides(["=3"])


def test_scenario_from_mapping_splits_lists():
    scenario, opts = scenario_from_mapping(
        {"name": "x", "alpha": "2", "beta": "0.5", "case": "fast", "n_cells": "8, 16", "taus": "1e-4", "max_iterations": "7"}
    )
    assert scenario.n_cells == [8, 16]
    assert scenario.taus == [1e-4]
    assert opts.max_iterations == 7


def test_scenario_from_mapping_rejects_unknown_and_invalid_keys():
    base = {"name": "x", "alpha": "2", "beta": "0.5", "case": "fast", "n_cells": "8", "taus": "1e-4"}
    with pytest.raises(InvalidArgumentError, match="unknown scenario key"):
        scenario_from_mapping({**base, "gamma": "1"})
    with pytest.raises(InvalidArgumentError):
        scenario_from_mapping({**base, "alpha": "0.5"})
    with pytest.raises(InvalidArgumentError):
        scenario_from_mapping({**base, "eps": None})


def test_load_scenario_file_with_overrides():
    scenario, opts = load_scenario(SCENARIO_DIR / "fast.env", {"n_cells": "16", "n_steps": "3"})
    assert scenario.name == "fast"
    assert scenario.n_cells == [16]
    assert scenario.taus == [1e-5, 1e-4]
    assert scenario.steps_for(1e-4) == 3
    assert opts.residual_tol == 1e-12


def test_load_scenario_shipped_files():
    for name in ("fast", "slow", "outside_slow", "outside_fast"):
        scenario, _ = load_scenario(SCENARIO_DIR / f"{name}.env")
        assert scenario.name == name


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(InvalidArgumentError, match="not found"):
        load_scenario(tmp_path / "nope.env")


def test_runs_follow_the_grid_order(small_fast, small_artifact):
    keys = [(run.n_cells, run.tau) for run in small_artifact.runs]
    assert keys == [(16, 1e-4), (16, 2e-4), (24, 1e-4), (24, 2e-4)]
    for run in small_artifact.runs:
        assert len(run.records) == small_fast.n_steps + 1
        H = np.array([r.entropy_H for r in run.records])
        slack = np.array([r.production_tol for r in run.records[1:]]) * run.tau
        assert np.all(np.diff(H) <= slack + 1e-14)
        masses = np.array([r.mass_u for r in run.records])
        assert np.all(np.diff(masses) >= -1e-11)


def test_run_with_zero_steps():
    scenario = fast_scenario(n_cells=[16], taus=[1e-4], n_steps=0)
    run = run_grid(scenario, 16, 1e-4)
    assert len(run.records) == 1
    assert run.certificate.insufficient_data


def test_convergence_failure_is_wrapped_with_run_context():
    scenario = slow_scenario(n_cells=[64], taus=[1e-4], n_steps=2)
    with pytest.raises(ScenarioError) as info:
        run_grid(scenario, 64, 1e-4, SolverOptions(max_iterations=1))
    assert info.value.scenario == "slow"
    assert info.value.n_cells == 64
    assert "N=64" in str(info.value)


def test_outside_region_scenario_still_runs():
    scenario = PRESETS["outside_fast"](n_cells=[16], taus=[1e-4], n_steps=3)
    artifact = run_scenario(scenario)
    assert artifact.runs[0].params.in_region_s is False
    assert not artifact.runs[0].certificate.theorem_hypotheses_met


def test_emit_csv_is_deterministic(small_artifact, tmp_path):
    first = emit_csv(small_artifact, tmp_path / "a")
    second = emit_csv(small_artifact, tmp_path / "b")
    assert len(first) == len(small_artifact.runs)
    for a, b in zip(first, second):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()
    frame = pd.read_csv(first[0])
    assert list(frame.columns) == RECORD_COLUMNS
    assert len(frame) == small_artifact.runs[0].n_steps + 1
    assert small_artifact.paths["records"] == second


def test_zero_step_csv_has_one_row(tmp_path):
    scenario = fast_scenario(n_cells=[8], taus=[1e-4], n_steps=0)
    artifact = run_scenario(scenario)
    (path,) = emit_csv(artifact, tmp_path)
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert lines[0] == ",".join(RECORD_COLUMNS)
    assert len(lines) == 2


def test_states_csv_reproduces_the_entropy(small_artifact, tmp_path):
    run = small_artifact.runs[0]
    path = emit_states_csv(run, tmp_path / "states.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == STATE_COLUMNS
    alpha = run.params.alpha
    V = run.records[-1].mass_u ** alpha
    for k, rows in frame.groupby("k"):
        H = entropy_H(make_state(rows["v"].to_numpy()), alpha, V)
        assert H == pytest.approx(run.records[k].entropy_H, rel=1e-12, abs=1e-15)


def test_states_need_a_positive_stride(small_artifact, tmp_path):
    with pytest.raises(InvalidArgumentError):
        emit_states_csv(small_artifact.runs[0], tmp_path / "s.csv", stride=0)


def test_write_artifact_writes_every_file(small_artifact, tmp_path):
    paths = write_artifact(small_artifact, tmp_path, states=True)
    for key in ("records", "certificates", "states"):
        assert len(paths[key]) == len(small_artifact.runs)
    text = (tmp_path / f"{small_artifact.runs[0].slug}.certificate.txt").read_text()
    assert "bound_pass=" in text


def test_mass_defect_study(small_fast, small_artifact, tmp_path):
    rows = mass_defect_study(small_fast, artifact=small_artifact)
    assert [(r.n_cells, r.tau) for r in rows] == [(16, 1e-4), (16, 2e-4), (24, 1e-4), (24, 2e-4)]
    for row in rows:
        assert row.defect == pytest.approx(row.final_mass - row.initial_mass)
        assert row.defect >= -1e-11
    frame = pd.read_csv(emit_mass_defect(rows, tmp_path / "defect.csv"))
    assert len(frame) == 4


def test_mass_defect_vanishes_for_constant_data():
    traj = simulate(make_state(np.full(8, 0.9)), SchemeParams(alpha=2.0, beta=1.5, tau=1e-3), 5)
    assert mass_defect(build_records(traj)) == pytest.approx(0.0, abs=1e-13)


def test_mass_defect_study_needs_two_sizes_and_two_steps():
    with pytest.raises(InvalidArgumentError):
        check_study_grid(fast_scenario(n_cells=[16], taus=[1e-4, 2e-4]))
    with pytest.raises(InvalidArgumentError):
        check_study_grid(fast_scenario(n_cells=[16, 32], taus=[1e-4]))


def test_region_frame_layout():
    scan = region_scan_ab([0.5, 1.0], [0.0, 1.0, 2.0], 0.25, ScanDomain(resolution=30))
    frame = region_frame(scan)
    assert list(frame.columns) == ["A", "B", "min_T", "min_T_formula", "shift", "verdict", "boundary_flag"]
    assert len(frame) == 6
    assert frame["A"].tolist() == [0.5, 0.5, 0.5, 1.0, 1.0, 1.0]
    assert set(frame["boundary_flag"]) <= {"true", "false"}
