import json
from pathlib import Path

import pytest

from ricci_lab.cli import ExitStatus, main
from ricci_lab.file import read_table, write_profile
from ricci_lab.flow import DIAGNOSTICS_HEADER
from ricci_lab.soliton import SWEEP_HEADER

GOLDEN_SWEEP = Path(__file__).parent / "data" / "soliton_sweep.golden.csv"


@pytest.fixture(autouse=True)
def work_in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_round_flow_converges(tmp_path):
    assert main(["flow", "--family", "round", "--snapshot-dir", "snapshots", "--snapshot-every", "1"]) == ExitStatus.OK
    _, rows = read_table(tmp_path / "diagnostics.csv", DIAGNOSTICS_HEADER)
    assert rows
    assert (tmp_path / "snapshots" / "profile_t0.000000.csv").is_file()


@pytest.mark.slow
def test_unnormalized_round_flow_goes_extinct(tmp_path):
    status = main(["flow", "--mode", "unnormalized", "--n", "41", "--t-end", "0.6",
                   "--diagnostics-csv", "out/diagnostics.csv"])
    assert status == ExitStatus.EXTINCTION
    assert (tmp_path / "out" / "diagnostics.csv").is_file()


def test_invalid_grid_writes_nothing(tmp_path):
    assert main(["flow", "--n", "10"]) == ExitStatus.INVALID_CONFIG
    assert list(tmp_path.iterdir()) == []


def test_invalid_initial_profile(tmp_path):
    config = tmp_path / "flow.yaml"
    config.write_text("profile:\n  family: perturbed\n  eps: 0.95\n")
    assert main(["flow", "--config", str(config)]) == ExitStatus.INVALID_CONFIG
    assert not (tmp_path / "diagnostics.csv").exists()


@pytest.mark.parametrize("argv", [
    [],
    ["flow", "--n", "many"],
    ["flow", "--mode", "sideways"],
    ["transmogrify"],
])
def test_bad_command_line(argv):
    with pytest.raises(SystemExit) as exit_info:
        main(argv)
    assert exit_info.value.code == ExitStatus.INVALID_CONFIG


def test_missing_config_document():
    assert main(["solve", "--config", "absent.yaml"]) == ExitStatus.IO_ERROR


def test_unknown_config_variable(tmp_path):
    config = tmp_path / "sweep.yaml"
    config.write_text("a_range: [0, 1]\n")
    assert main(["soliton-sweep", "--config", str(config)]) == ExitStatus.INVALID_CONFIG


def test_sweep_is_byte_identical_across_runs(tmp_path):
    for name in ("first.csv", "second.csv"):
        assert main(["soliton-sweep", "--step", "1e-3", "--output-csv", name]) == ExitStatus.OK
    first = (tmp_path / "first.csv").read_bytes()
    assert first == (tmp_path / "second.csv").read_bytes()
    header, rows = read_table(tmp_path / "first.csv", SWEEP_HEADER)
    assert [float(row[0]) for row in rows] == [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert all(row[header.index("A")] for row in rows)


def test_sweep_reports_non_closure(tmp_path):
    assert main(["soliton-sweep", "--step", "1e-3", "--a-values", "0.3", "--output-csv", "sweep.csv",
                 "--trajectory-dir", "trajectories"]) == ExitStatus.OK
    header, rows = read_table(tmp_path / "sweep.csv", SWEEP_HEADER)
    assert len(rows) == 1
    assert abs(float(rows[0][header.index("closure_defect")])) > 0.01
    assert len(list((tmp_path / "trajectories").iterdir())) == 1


@pytest.mark.slow
def test_sweep_matches_golden(tmp_path):
    assert main(["soliton-sweep", "--output-csv", "sweep.csv"]) == ExitStatus.OK
    produced = (tmp_path / "sweep.csv").read_bytes()
    if not GOLDEN_SWEEP.is_file():
        GOLDEN_SWEEP.parent.mkdir(parents=True, exist_ok=True)
        GOLDEN_SWEEP.write_bytes(produced)
        pytest.skip(f"recorded {GOLDEN_SWEEP}, commit it")
    assert produced == GOLDEN_SWEEP.read_bytes()


@pytest.mark.slow
def test_solve_with_closure_outside_bracket(tmp_path, capsys):
    status = main(["solve", "--a-lo", "0.2", "--a-hi", "1", "--step", "1e-3", "--output-json", "solve.json"])
    assert status == ExitStatus.A_STAR_OUT_OF_TOLERANCE
    document = json.loads((tmp_path / "solve.json").read_text())
    assert document["at_bracket_edge"] is True
    assert document["a_star"] == pytest.approx(0.2, abs=1e-6)
    assert json.loads(capsys.readouterr().out) == document


def test_bad_bracket():
    assert main(["solve", "--a-lo", "1", "--a-hi", "-1"]) == ExitStatus.INVALID_CONFIG


def test_identity_check(tmp_path):
    status = main(["identity-check", "--step", "1e-3", "--a-values", "0.3", "0.0", "--output-json", "identity.json"])
    assert status == ExitStatus.OK
    document = json.loads((tmp_path / "identity.json").read_text())
    assert document["passed"] is True
    assert [entry["a"] for entry in document["entries"]] == [0.0, 0.3]
    assert document["entries"][1]["I"] > 0


def test_identity_check_failure():
    assert main(["identity-check", "--step", "1e-3", "--a-values", "0.3", "--residual-tolerance", "1e-300"]) \
        == ExitStatus.FAILURE


def test_diagnose(tmp_path, perturbed_metric):
    write_profile(perturbed_metric, tmp_path / "profile.csv")
    assert main(["diagnose", "profile.csv", "--output-json", "diagnose.json"]) == ExitStatus.OK
    document = json.loads((tmp_path / "diagnose.json").read_text())
    assert document["n"] == perturbed_metric.grid.n
    assert isinstance(document["admissible"], bool)
    assert abs(document["gb_defect"]) < 1e-3
    assert document["entropy"] is None


def test_diagnose_rejects_malformed_profile(tmp_path):
    (tmp_path / "profile.csv").write_text("s,phi,h\n0,1,x\n")
    assert main(["diagnose", "profile.csv"]) == ExitStatus.INVALID_CONFIG


def test_diagnose_missing_profile():
    assert main(["diagnose", "absent.csv"]) == ExitStatus.IO_ERROR


def test_verify_rejects_unknown_tolerance(tmp_path):
    config = tmp_path / "verify.yaml"
    config.write_text("tolerances:\n  round_volume: 1.0\n")
    assert main(["verify", "--config", str(config)]) == ExitStatus.INVALID_CONFIG
