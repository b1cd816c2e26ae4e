"""Deterministic CSV tables (floats written round-trip exact, missing as empty)."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_table(path, columns, rows) -> Path:
    """``rows`` is an iterable of sequences aligned with ``columns``."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    tmp.replace(path)
    return path


def read_table(path):
    """(columns, list of row lists of strings)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        cols = next(r)
        return cols, [row for row in r]


def to_float(s: str) -> float:
    return float(s) if s != "" else math.nan


def read_matrix(path, id_cols: int):
    """Split a table into its first ``id_cols`` string columns and a float matrix for the rest."""
    cols, rows = read_table(path)
    ids = [row[:id_cols] for row in rows]
    X = np.array([[to_float(v) for v in row[id_cols:]] for row in rows], dtype=np.float64)
    X = X.reshape(len(rows), len(cols) - id_cols)
    return cols[:id_cols], cols[id_cols:], ids, X
