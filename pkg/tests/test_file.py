import pytest

from ricci_lab.file import (CsvFormatError, file2list, format_cell, format_float, list2file, read_profile,
                            read_table, write_diagnostics, write_profile, write_sweep, write_table)
from ricci_lab.flow import DIAGNOSTICS_HEADER, FlowState, diagnose
from ricci_lab.soliton import SWEEP_HEADER, SweepRow


def test_format_float():
    assert format_float(0.1) == "1.0000000000000001e-01"
    assert format_float(-2.0) == "-2.0000000000000000e+00"


@pytest.mark.parametrize("value, expected", [
    (None, ""),
    (True, "true"),
    (3, "3"),
    ("x", "x"),
    (0.5, "5.0000000000000000e-01"),
])
def test_format_cell(value, expected):
    assert format_cell(value) == expected


def test_list2file_round_trip(tmp_path):
    path = tmp_path / "lines.txt"
    list2file(["a", "b"], path)
    assert file2list(path) == ["a", "b"]
    assert path.read_bytes() == b"a\nb\n"


def test_write_table_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        write_table(("a", "b"), [(1.0,)], tmp_path / "t.csv")


def test_read_table_checks_header(tmp_path):
    path = tmp_path / "t.csv"
    write_table(("a", "b"), [(1.0, 2.0)], path)
    with pytest.raises(CsvFormatError):
        read_table(path, ("a", "c"))
    path.write_text("a,b\n1,2,3\n")
    with pytest.raises(CsvFormatError):
        read_table(path)


def test_profile_is_read_back_exactly(tmp_path, perturbed_metric):
    path = tmp_path / "profile.csv"
    write_profile(perturbed_metric, path)
    assert path.read_text().splitlines()[0] == "s,phi,h"
    assert read_profile(path).allclose(perturbed_metric, atol=0.0)


def test_profile_with_bad_grid(tmp_path):
    path = tmp_path / "profile.csv"
    rows = [(0.0, 1.0, 0.0)] + [(0.1 * i, 1.0, 1.0) for i in range(1, 8)] + [(0.95, 1.0, 0.0)]
    write_table(("s", "phi", "h"), rows, path)
    with pytest.raises(CsvFormatError):
        read_profile(path)


def test_missing_profile(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_profile(tmp_path / "absent.csv")


def test_diagnostics_csv_leaves_undefined_cells_empty(tmp_path, perturbed_metric):
    path = tmp_path / "diagnostics.csv"
    write_diagnostics([diagnose(FlowState(perturbed_metric, 0.0))], path)
    header, rows = read_table(path, DIAGNOSTICS_HEADER)
    assert rows[0][header.index("entropy")] == ""
    assert rows[0][header.index("ratio")] == ""


def test_sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep([SweepRow(a=0.3, hit_zero=False)], path)
    assert path.read_text() == ",".join(SWEEP_HEADER) + "\n2.9999999999999999e-01,,,,,\n"
