"""Reading and writing M4-format CSV panels and forecast tables."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .panel import PanelError, SeriesMatrix

__all__ = ["load_m4_csv", "load_metadata_csv", "write_panel_csv", "write_forecast_csv", "read_forecast_csv"]


class IngestError(PanelError):
    """A file could not be parsed into a panel."""


def _looks_like_header(row: list[str]) -> bool:
    # An M4 header row is non-numeric beyond the id column ("V1", "F1", ...).
    for cell in row[1:]:
        cell = cell.strip()
        if not cell:
            continue
        try:
            float(cell)
            return False
        except ValueError:
            return True
    return False


def load_m4_csv(path, period: int = 12) -> SeriesMatrix:
    """Load an M4-format CSV: first column is the series id, the rest observations.

    Rows may be ragged; empty cells (including trailing ones) are unobserved.
    Malformed numeric cells are reported with their row and column.
    """
    path = Path(path)
    ids: list[str] = []
    rows: list[tuple[list[float], list[bool]]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and _looks_like_header(row):
                continue
            ids.append(row[0].strip().strip('"'))
            vals: list[float] = []
            mask: list[bool] = []
            for col, cell in enumerate(row[1:], start=2):
                cell = cell.strip()
                if not cell or cell.upper() in ("NA", "NAN"):
                    vals.append(0.0)
                    mask.append(False)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise IngestError(f"{path}: line {lineno}, column {col}: not a number: {cell!r}") from None
                mask.append(True)
            rows.append((vals, mask))
    if not rows:
        raise IngestError(f"{path}: no series found")

    T = max(len(v) for v, _ in rows)
    values = np.zeros((len(rows), T))
    mask = np.zeros((len(rows), T), dtype=bool)
    for i, (v, m) in enumerate(rows):
        values[i, : len(v)] = v
        mask[i, : len(m)] = m
    try:
        return SeriesMatrix(values, mask, tuple(ids), period)
    except PanelError as exc:
        raise IngestError(f"{path}: {exc}") from None


def load_metadata_csv(path) -> dict[str, str]:
    """Read an id -> category map from a metadata CSV.

    Uses the column named "category" if the header has one, else the second
    column.  The first column is always the series id.
    """
    path = Path(path)
    out: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty metadata file")
        names = [c.strip().strip('"').lower() for c in header]
        cat_col = names.index("category") if "category" in names else 1
        if not _looks_like_header(header):
            # Headerless file: the first row is data.
            out[header[0].strip().strip('"')] = header[cat_col].strip().strip('"')
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= cat_col:
                raise IngestError(f"{path}: line {lineno}: missing category column")
            out[row[0].strip().strip('"')] = row[cat_col].strip().strip('"')
    return out


def write_panel_csv(matrix: SeriesMatrix, path) -> None:
    """Write a panel in the same M4 format ``load_m4_csv`` reads (masked cells empty)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"V{t + 1}" for t in range(matrix.n_time)])
        for i in range(matrix.n_series):
            row: list[str] = [matrix.ids[i]]
            row += [repr(float(v)) if m else "" for v, m in zip(matrix.values[i], matrix.mask[i])]
            writer.writerow(row)


def write_forecast_csv(ids, forecasts: np.ndarray, path) -> None:
    """Write an id x horizon forecast table with F1..Fh columns."""
    forecasts = np.asarray(forecasts)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"F{k + 1}" for k in range(forecasts.shape[1])])
        for sid, row in zip(ids, forecasts):
            writer.writerow([sid] + [repr(float(v)) for v in row])


def read_forecast_csv(path) -> tuple[list[str], np.ndarray]:
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(c) for c in row[1:]])
    return ids, np.array(rows)
