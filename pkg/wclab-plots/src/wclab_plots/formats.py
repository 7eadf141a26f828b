"""Readers for the wclab bundle file formats.

Four CSV shapes cover everything this package draws:

- complex matrix: header ``row,col,re,im``, one entry per line.
- isolation matrix: header ``i,j,isolation_db``, one dB value per link,
  plus a trailing ``# mean_db=...,min_db=...`` summary comment.
- grid (range-velocity map or angular spectrum): a single leading comment
  ``# <name>_start=...,<name>_step=...,...`` carrying both axes, then one
  comma-separated row of values per grid row.
- peaks: header ``range_m,velocity_mps,power_db`` or
  ``elevation_deg,azimuth_deg,power_db``, strongest entry first.
"""

from __future__ import annotations

import numpy as np


class FormatError(Exception):
    """An input file does not follow the documented bundle format."""


def _lines(path):
    try:
        with open(path) as f:
            return f.read().splitlines()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e


def read_matrix_csv(path) -> np.ndarray:
    """Complex matrix from `row,col,re,im` rows."""
    lines = _lines(path)
    if not lines or lines[0].strip() != "row,col,re,im":
        raise FormatError(f"{path}: expected matrix header 'row,col,re,im'")
    entries = {}
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            i, j, re, im = line.split(",")
            entries[(int(i), int(j))] = complex(float(re), float(im))
        except ValueError as e:
            raise FormatError(f"{path}:{n}: bad matrix row {line!r}") from e
    if not entries:
        raise FormatError(f"{path}: no matrix entries")
    n_rows = max(i for i, _ in entries) + 1
    n_cols = max(j for _, j in entries) + 1
    m = np.zeros((n_rows, n_cols), dtype=complex)
    for (i, j), v in entries.items():
        m[i, j] = v
    return m


def read_isolation_csv(path) -> np.ndarray:
    """Per-link isolation (dB) from `i,j,isolation_db` rows."""
    lines = _lines(path)
    if not lines or lines[0].strip() != "i,j,isolation_db":
        raise FormatError(f"{path}: expected isolation header 'i,j,isolation_db'")
    entries = {}
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            i, j, db = line.split(",")
            entries[(int(i), int(j))] = float(db)
        except ValueError as e:
            raise FormatError(f"{path}:{n}: bad isolation row {line!r}") from e
    if not entries:
        raise FormatError(f"{path}: no isolation entries")
    n_rows = max(i for i, _ in entries) + 1
    n_cols = max(j for _, j in entries) + 1
    m = np.full((n_rows, n_cols), np.nan)
    for (i, j), v in entries.items():
        m[i, j] = v
    return m


def read_grid_csv(path) -> tuple[np.ndarray, dict]:
    """Grid values plus the axis metadata from the leading comment line.

    Returns (values, meta) where meta maps e.g. "range_start" -> float. The
    caller decides which axis names it expects; both grid kinds share the
    mechanical format.
    """
    lines = _lines(path)
    if not lines or not lines[0].startswith("# "):
        raise FormatError(f"{path}: expected a leading '# key=value,...' metadata line")
    meta = {}
    for kv in lines[0][2:].split(","):
        try:
            key, value = kv.split("=")
            meta[key.strip()] = float(value)
        except ValueError as e:
            raise FormatError(f"{path}: bad metadata field {kv!r}") from e
    rows = []
    width = None
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError as e:
            raise FormatError(f"{path}:{n}: non-numeric grid row") from e
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(f"{path}:{n}: ragged grid row ({len(row)} != {width})")
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no grid rows")
    return np.asarray(rows), meta


PEAK_HEADERS = {
    "range_m,velocity_mps,power_db": "range-velocity",
    "elevation_deg,azimuth_deg,power_db": "angle",
}


def read_peaks_csv(path) -> tuple[str, list]:
    """(domain, [(a, b, power_db), ...]) with the domain named by the header."""
    lines = _lines(path)
    if not lines or lines[0].strip() not in PEAK_HEADERS:
        raise FormatError(
            f"{path}: expected a peak-list header, one of {sorted(PEAK_HEADERS)}"
        )
    domain = PEAK_HEADERS[lines[0].strip()]
    peaks = []
    for n, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            a, b, p = (float(v) for v in line.split(","))
        except ValueError as e:
            raise FormatError(f"{path}:{n}: bad peak row {line!r}") from e
        peaks.append((a, b, p))
    return domain, peaks
