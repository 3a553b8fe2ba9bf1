"""CSV ingestion and mean-centering of curve samples.

Input format: UTF-8 comma-separated values, first row holds the grid points,
each subsequent row one curve (``rows-are-curves``).  Under
``columns-are-curves`` the whole table is transposed: first column grid,
remaining columns curves.  Numeric cells use decimal-point notation without
quoting; missing values are rejected rather than imputed.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import CurveSet, Grid

LAYOUTS = ("rows-are-curves", "columns-are-curves")


def _parse_cell(text, row, col):
    text = text.strip()
    if not text:
        raise DataFormatError("empty cell", row=row, column=col)
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric cell {text!r}", row=row, column=col) from None


def load_curves(path, layout: str = "rows-are-curves") -> CurveSet:
    """Read a curve table; returns an uncentered CurveSet.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    DataFormatError
        On ragged rows, non-numeric cells or a non-increasing grid header,
        with the offending row/column in the message.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise DataFormatError("need a grid header plus at least one curve row")

    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(f"ragged row: expected {width} cells, got {len(row)}", row=i)
    cells = np.array(
        [[_parse_cell(c, i, j) for j, c in enumerate(row)] for i, row in enumerate(rows)]
    )
    if layout == "columns-are-curves":
        cells = cells.T

    points = cells[0]
    if np.any(np.diff(points) <= 0):
        bad = int(np.nonzero(np.diff(points) <= 0)[0][0]) + 1
        raise DataFormatError("grid points must be strictly increasing", row=0, column=bad)
    h = np.diff(points)
    weights = np.empty_like(points)
    weights[0] = h[0] / 2
    weights[-1] = h[-1] / 2
    weights[1:-1] = (h[:-1] + h[1:]) / 2
    return CurveSet(Grid(points, weights), cells[1:], centered=False)


def write_curves(c: CurveSet, path) -> None:
    """Write a CurveSet in the rows-are-curves layout with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(f"{x:.17g}" for x in c.grid.points)
        for row in c.values:
            writer.writerow(f"{x:.17g}" for x in row)


def center(c: CurveSet) -> CurveSet:
    """Subtract the cross-sectional mean from every column.  Idempotent."""
    return CurveSet(c.grid, c.values - c.values.mean(axis=0), centered=True)
