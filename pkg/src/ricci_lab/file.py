#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
File utilities and the CSV formats shared by the commands: profiles, diagnostics and sweeps
"""

import os
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from typeguard import typechecked

from ricci_lab.dir import check_dir
from ricci_lab.flow import DIAGNOSTICS_HEADER, DiagnosticsRecord
from ricci_lab.geometry import RadialGrid, WarpedMetric
from ricci_lab.soliton import SWEEP_HEADER, SweepRow
from ricci_lab.type import FloatArray, PathType

PROFILE_HEADER = ("s", "phi", "h")
TRAJECTORY_HEADER = ("r", "phi", "h")

Cell = Union[float, int, bool, str, None]


@typechecked
def check_file(filepath: PathType):
    if not Path(filepath).is_file():
        if Path(filepath).is_dir():
            raise FileExistsError(f"Path '{str(filepath)}' is directory, not file")
        else:
            raise FileNotFoundError(f"File '{str(filepath)}' doesn't exist")


@typechecked
def file2list(file_path: PathType, strip=True):
    """
    Source file to list
    :param strip: (bool) if to strip every line
    :param file_path: file to source
    :return: list of rows
    """
    check_file(file_path)
    with open(file_path) as fin:
        if strip:
            return [line.strip() for line in fin]
        else:
            return fin.readlines()


def list2file(lines: Iterable, file_path: PathType, add_sep=True):
    """
    Write list to file one row by row
    :param add_sep: (bool) add line separator to the end of every line
    :param lines: input list
    :param file_path: output file
    :return:
    """
    check_dir(Path(file_path).parent)
    # "\n" and not os.linesep, outputs must be byte-identical across platforms
    with open(file_path, "w", newline="\n") as fout:
        if add_sep:
            for line in lines:
                fout.write(line + "\n")
        else:
            fout.writelines(lines)


def format_float(value: float) -> str:
    """ 17 significant digits, lowercase exponent """
    return f"{value:.16e}"


def format_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format_float(float(value))


def write_table(header: Sequence[str], rows: Iterable[Sequence[Cell]], file_path: PathType):
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"Row {row} doesn't match header {header}")
        lines.append(",".join(format_cell(value) for value in row))
    list2file(lines, file_path)


def read_table(file_path: PathType, expected_header: Optional[Sequence[str]] = None):
    """
    :return: (header, list of rows with string cells)
    """
    lines = [line for line in file2list(file_path) if line]
    if not lines:
        raise CsvFormatError(f"File '{file_path}' is empty")
    header = tuple(lines[0].split(","))
    if expected_header is not None and header != tuple(expected_header):
        raise CsvFormatError(f"Expected header '{','.join(expected_header)}' in '{file_path}', "
                             f"got '{lines[0]}'")
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        columns = line.split(",")
        if len(columns) != len(header):
            raise CsvFormatError(f"Line {number} of '{file_path}' has {len(columns)} columns instead of {len(header)}")
        rows.append(columns)
    return header, rows


def write_profile(metric: WarpedMetric, file_path: PathType):
    write_table(PROFILE_HEADER, zip(metric.grid.s, metric.phi, metric.h), file_path)


def write_trajectory(r: FloatArray, h: FloatArray, file_path: PathType):
    """ Soliton trajectory in the profile format, r in place of s and phi = 1 """
    write_table(TRAJECTORY_HEADER, zip(r, np.ones_like(r), h), file_path)


def write_diagnostics(records: Iterable[DiagnosticsRecord], file_path: PathType):
    write_table(DIAGNOSTICS_HEADER, (record.as_row() for record in records), file_path)


def write_sweep(rows: Iterable[SweepRow], file_path: PathType):
    """ Rows without a zero of h keep their a and leave every other column empty """
    write_table(SWEEP_HEADER, (row.as_row() for row in rows), file_path)


def read_profile(file_path: PathType) -> WarpedMetric:
    _, rows = read_table(file_path, PROFILE_HEADER)
    try:
        values = np.array(rows, dtype=float)
    except ValueError as e:
        raise CsvFormatError(f"Non-numeric value in profile '{file_path}': {e}")
    if values.ndim != 2 or values.shape[0] == 0:
        raise CsvFormatError(f"Profile '{file_path}' has no rows")
    grid = RadialGrid(values.shape[0])
    if not np.allclose(values[:, 0], grid.s, rtol=0, atol=1e-12):
        raise CsvFormatError(f"Column 's' of '{file_path}' is not a uniform grid on [0, 1]")
    return WarpedMetric(grid, values[:, 1], values[:, 2])


def output_path(directory: PathType, name: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, name)


class CsvFormatError(ValueError):
    pass
