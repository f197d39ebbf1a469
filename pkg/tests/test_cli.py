import numpy as np
import pandas as pd
import pytest

from app.cli import _join_negative_values, dispatch, parse_range
from app.core.errors import InvalidArgumentError

TINY = """\
NAME=tiny
ALPHA=2
BETA=0.5
CASE=fast
N_CELLS=8
TAUS=1e-4
N_STEPS=3
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.env"
    path.write_text(TINY)
    return path


def test_simulate_writes_tables_and_certificates(tiny_config, tmp_path):
    out = tmp_path / "out"
    assert dispatch(["simulate", "--config", str(tiny_config), "--out", str(out), "states=1"]) == 0
    frame = pd.read_csv(out / "tiny_N8_tau0.0001.csv")
    assert len(frame) == 4
    assert (out / "tiny_N8_tau0.0001.certificate.txt").is_file()
    assert (out / "tiny_N8_tau0.0001.states.csv").is_file()


def test_analyze_writes_the_mass_defect_table(tiny_config, tmp_path):
    out = tmp_path / "out"
    argv = ["analyze", "--config", str(tiny_config), "--out", str(out), "n_cells=8,12", "taus=1e-4,2e-4"]
    assert dispatch(argv) == 0
    defects = pd.read_csv(out / "tiny_mass_defect.csv")
    assert len(defects) == 4
    assert (out / "tiny_certificates.csv").is_file()


def test_analyze_rejects_a_single_grid(tiny_config, tmp_path):
    out = tmp_path / "out"
    assert dispatch(["analyze", "--config", str(tiny_config), "--out", str(out)]) == 1
    assert not out.exists()


def test_missing_config_is_a_usage_error(tmp_path):
    out = tmp_path / "out"
    assert dispatch(["simulate", "--out", str(out)]) == 1
    assert dispatch(["simulate", "--config", str(tmp_path / "missing.env"), "--out", str(out)]) == 1
    assert not out.exists()


def test_unknown_verb_and_flag(tmp_path, capsys):
    assert dispatch(["integrate"]) == 1
    assert "usage" in capsys.readouterr().err
    assert dispatch(["scan-ab", "--nonsense", "1", "--out", str(tmp_path)]) == 1


def test_malformed_and_unknown_overrides(tiny_config, tmp_path):
    out = str(tmp_path / "out")
    assert dispatch(["simulate", "--config", str(tiny_config), "--out", out, "alpha"]) == 1
    assert dispatch(["simulate", "--config", str(tiny_config), "--out", out, "gamma=2"]) == 1
    assert dispatch(["scan-ab", "--out", out, "speed=3"]) == 1


def test_bad_eps(tmp_path):
    assert dispatch(["scan-ab", "--eps", "1.5", "--out", str(tmp_path)]) == 1


def test_runtime_failure_exits_with_two(tmp_path):
    config = tmp_path / "slow.env"
    config.write_text("NAME=slow\nALPHA=3\nBETA=4\nCASE=slow\nN_CELLS=64\nTAUS=1e-4\nN_STEPS=2\n")
    argv = ["simulate", "--config", str(config), "--out", str(tmp_path / "out"), "max_iterations=1"]
    assert dispatch(argv) == 2


def test_scan_ab_with_negative_range(tmp_path):
    argv = ["scan-ab", "--a", "0.5:1.5:3", "--b", "-1:3:5", "--out", str(tmp_path), "resolution=30"]
    assert dispatch(argv) == 0
    frame = pd.read_csv(tmp_path / "region_ab_eps0.25.csv")
    assert len(frame) == 15
    on_line = frame[np.isclose(frame["A"], 1.0)]
    assert len(on_line) == 5
    assert (on_line["verdict"] != "inadmissible").all()


def test_scan_alphabeta(tmp_path):
    argv = ["scan-alphabeta", "--alpha", "2:3:2", "--beta", "1:2:2", "--out", str(tmp_path), "resolution=30"]
    assert dispatch(argv) == 0
    frame = pd.read_csv(tmp_path / "region_alphabeta_eps0.25.csv")
    assert list(frame.columns[:2]) == ["alpha", "beta"]
    assert len(frame) == 4


def test_check_sbp_on_the_line_a_equals_one(tmp_path):
    argv = ["check-sbp", "--a", "1", "--b", "0.5", "--out", str(tmp_path), "samples=200", "mode=wide", "n=8"]
    assert dispatch(argv) == 0
    frame = pd.read_csv(tmp_path / "sbp_check.csv")
    assert len(frame) == 200
    assert (frame["holds"].astype(str).str.lower() == "true").all()
    assert not (tmp_path / "sbp_counterexamples.csv").exists()


def test_check_local_inside_the_region(tmp_path):
    argv = ["check-local", "--a", "1.5", "--b", "3", "--out", str(tmp_path), "samples=2", "levels=4"]
    assert dispatch(argv) == 0
    frame = pd.read_csv(tmp_path / "local_expansion_A1.5_B3.csv")
    assert len(frame) == 8
    assert frame["order"].notna().all()


def test_check_local_default_ladder_reaches_below_1e_4(tmp_path):
    argv = ["check-local", "--a", "1.5", "--b", "3", "--out", str(tmp_path), "samples=1"]
    assert dispatch(argv) == 0
    frame = pd.read_csv(tmp_path / "local_expansion_A1.5_B3.csv")
    assert len(frame) == 8
    assert frame["h"].min() < 1e-4


def test_check_local_outside_the_region(tmp_path):
    assert dispatch(["check-local", "--a", "2", "--b", "0.5", "--out", str(tmp_path)]) == 1


def test_join_negative_values():
    assert _join_negative_values(["--b", "-2:6:3", "--a", "1"]) == ["--b=-2:6:3", "--a", "1"]
    assert _join_negative_values(["--out", "-x"]) == ["--out", "-x"]


def test_parse_range():
    np.testing.assert_allclose(parse_range("0:1:3", "", "a"), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(parse_range(None, "2.5", "a"), [2.5])
    with pytest.raises(InvalidArgumentError):
        parse_range("1:0:3", "", "a")
    with pytest.raises(InvalidArgumentError):
        parse_range("1:2", "", "a")


def test_sign_map_export(tmp_path):
    argv = ["sign-map", "--a", "0.6", "--b", "4", "--eps", "0.005", "--out", str(tmp_path)]
    assert dispatch(argv + ["resolution=20"]) == 0
    frame = pd.read_csv(tmp_path / "sign_map_A0.6_B4_eps0.005.csv")
    assert list(frame.columns) == ["X", "Y", "first_term", "shift_term", "T"]
    assert len(frame) == 21 * 21
    negative = frame["first_term"] < 0.0
    assert negative.any()
    assert (frame.loc[negative, "shift_term"] >= 0.0).all()


def test_sign_map_needs_both_exponents(tmp_path):
    assert dispatch(["sign-map", "--a", "0.6", "--out", str(tmp_path)]) == 1
