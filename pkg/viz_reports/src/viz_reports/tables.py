"""Parsed, schema-validated views of the simulator's CSV outputs.

Readers only: nothing here mutates the input files.
"""
from __future__ import annotations

import csv
import dataclasses

import numpy as np

__all__ = ["SchemaError", "SweepTable", "HistoryTable",
           "SWEEP_COLUMNS", "HISTORY_FIXED_COLUMNS"]

SWEEP_COLUMNS = ("s_coeff", "sup_Hsm1", "l2t_Hsmhalf", "sup_Hsm2",
                 "l2t_Hsm3half", "completed")

# Norm columns in history.csv are named norm_H<sigma> and vary with the
# tracked Sobolev indices; everything else is fixed.
HISTORY_FIXED_COLUMNS = ("t", "dt", "inf_RT", "separation", "energy")

# Columns holding a difference to the zero-surface-tension reference,
# in the order they are plotted.
DIFF_COLUMNS = ("sup_Hsm1", "l2t_Hsmhalf", "sup_Hsm2", "l2t_Hsm3half")


class SchemaError(ValueError):
    """The CSV does not match the documented schema."""


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: empty file, expected a header row")
    return rows[0], rows[1:]


def _parse_float(token: str, path, col: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise SchemaError(f"{path}: non-numeric value {token!r} in "
                          f"column {col!r}") from None


@dataclasses.dataclass(frozen=True)
class SweepTable:
    """Rows of ``sweep.csv``: per-coefficient differences to the
    zero-surface-tension reference, plus a completion flag."""

    s_coeff: np.ndarray
    diffs: dict            # column name -> ndarray, aligned with s_coeff
    completed: np.ndarray  # bool

    @classmethod
    def from_csv(cls, path) -> "SweepTable":
        header, body = _read_rows(path)
        if tuple(header) != SWEEP_COLUMNS:
            raise SchemaError(
                f"{path}: header {header!r} does not match the sweep "
                f"schema {list(SWEEP_COLUMNS)!r}")
        cols = {name: [] for name in SWEEP_COLUMNS}
        for row in body:
            if len(row) != len(SWEEP_COLUMNS):
                raise SchemaError(f"{path}: row {row!r} has {len(row)} "
                                  f"fields, expected {len(SWEEP_COLUMNS)}")
            for name, token in zip(SWEEP_COLUMNS, row):
                cols[name].append(_parse_float(token, path, name))
        completed = np.asarray(cols.pop("completed"), dtype=float)
        if not np.all(np.isin(completed, (0.0, 1.0))):
            raise SchemaError(f"{path}: completed column must be 0/1")
        s_coeff = np.asarray(cols.pop("s_coeff"))
        diffs = {name: np.asarray(vals) for name, vals in cols.items()}
        done = completed.astype(bool)
        if not np.all(np.isfinite(s_coeff)) or np.any(s_coeff <= 0):
            raise SchemaError(f"{path}: s_coeff must be positive and finite")
        for name, vals in diffs.items():
            if not np.all(np.isfinite(vals[done])):
                raise SchemaError(f"{path}: non-finite {name} on a "
                                  f"completed row")
        return cls(s_coeff=s_coeff, diffs=diffs, completed=done)

    @property
    def n_completed(self) -> int:
        return int(np.count_nonzero(self.completed))


@dataclasses.dataclass(frozen=True)
class HistoryTable:
    """Rows of ``history.csv``: monitors and tracked Sobolev norms per
    accepted time step."""

    t: np.ndarray
    fixed: dict   # fixed column name -> ndarray
    norms: dict   # norm column name (norm_H<sigma>) -> ndarray

    @classmethod
    def from_csv(cls, path) -> "HistoryTable":
        header, body = _read_rows(path)
        n_fixed = len(HISTORY_FIXED_COLUMNS)
        if tuple(header[:n_fixed]) != HISTORY_FIXED_COLUMNS:
            raise SchemaError(
                f"{path}: header must start with "
                f"{list(HISTORY_FIXED_COLUMNS)!r}, got {header!r}")
        norm_names = header[n_fixed:]
        bad = [c for c in norm_names if not c.startswith("norm_H")]
        if bad:
            raise SchemaError(f"{path}: unexpected columns {bad!r} "
                              f"(norm columns are named norm_H<sigma>)")
        cols = {name: [] for name in header}
        for row in body:
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {row!r} has {len(row)} "
                                  f"fields, expected {len(header)}")
            for name, token in zip(header, row):
                cols[name].append(_parse_float(token, path, name))
        arrays = {name: np.asarray(vals) for name, vals in cols.items()}
        for name, vals in arrays.items():
            if not np.all(np.isfinite(vals)):
                raise SchemaError(f"{path}: non-finite value in "
                                  f"column {name!r}")
        t = arrays["t"]
        if len(t) == 0:
            raise SchemaError(f"{path}: no data rows")
        if np.any(np.diff(t) <= 0):
            raise SchemaError(f"{path}: times must be strictly increasing")
        return cls(t=t,
                   fixed={n: arrays[n] for n in HISTORY_FIXED_COLUMNS},
                   norms={n: arrays[n] for n in norm_names})
