"""Strict reading of sweep CSVs.

The producer emits a fixed-schema CSV; this reader only assumes a header
row plus uniform data rows, and validates exactly what rendering needs:
the referenced columns exist, every row has the full field count, and
gridded plot kinds get a complete Cartesian product of the two axes.
"""

import csv


class CsvError(Exception):
    """Input CSV cannot be used for the requested plot."""


def read_csv(path: str) -> dict:
    """Read a CSV into {column: list of strings}; strict shape checks."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(f"{path}: no data rows (file is empty)") from None
        rows = list(reader)
    if not rows:
        raise CsvError(f"{path}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvError(
                f"{path}: row {i + 2} has {len(row)} fields, header has "
                f"{len(header)}"
            )
    return {name: [row[j] for row in rows] for j, name in enumerate(header)}


def column(data: dict, name: str, path: str = "input"):
    """Numeric column by name."""
    if name not in data:
        raise CsvError(f"{path}: missing column {name!r}")
    try:
        return [float(v) for v in data[name]]
    except ValueError as exc:
        raise CsvError(f"{path}: column {name!r} is not numeric: {exc}") from None


def pivot_grid(xs, ys, values, path: str = "input"):
    """Arrange (x, y, value) triples into a complete rectangular grid.

    Returns (x_axis, y_axis, grid) with grid[j][i] = value at
    (x_axis[i], y_axis[j]).  A missing or duplicated grid point is an
    error (ragged grid).
    """
    x_axis = sorted(set(xs))
    y_axis = sorted(set(ys))
    if len(xs) != len(x_axis) * len(y_axis):
        raise CsvError(
            f"{path}: ragged grid, {len(xs)} rows != "
            f"{len(x_axis)} x {len(y_axis)} axis points"
        )
    index = {(x, y): v for x, y, v in zip(xs, ys, values)}
    if len(index) != len(xs):
        raise CsvError(f"{path}: ragged grid, duplicate (x, y) points")
    try:
        grid = [[index[(x, y)] for x in x_axis] for y in y_axis]
    except KeyError as missing:
        raise CsvError(f"{path}: ragged grid, missing point {missing}") from None
    return x_axis, y_axis, grid
