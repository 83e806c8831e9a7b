"""CSV contract of the experiment outputs: expected headers and readers.

Each figure kind maps to one `<experiment>_samples.csv` file; headers are
validated before any drawing, and a mismatch raises SchemaError carrying an
explicit column diff (missing / unexpected) instead of crashing downstream.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

#: figure kind -> (input csv stem, required columns in order)
TABLES = {
    "dos": ("dos_histogram_samples.csv", ["sample", "part", "eigenvalue"]),
    "ensemble": (
        "bath_ensemble_samples.csv",
        [
            "beta", "beta_prime", "sample", "d_bar", "r_d_bar", "r_nd_bar",
            "kappa_d_mean", "kappa_nd_mean", "resamples",
        ],
    ),
    "beta-sweep": (
        "beta_sweep_samples.csv",
        [
            "beta", "beta_prime", "sample", "d_bar", "r_d_bar", "r_nd_bar",
            "kappa_d_mean", "kappa_nd_mean", "resamples",
        ],
    ),
    "zeno": (
        "zeno_probe_samples.csv",
        ["sample", "t", "lambda", "distance", "monotone", "assertable"],
    ),
    "chain2": (
        "chain2_sweep_samples.csv",
        [
            "sample", "beta", "m_bits", "stationary_error_l1", "deviation_l1",
            "bound", "bound_valid", "e_norm", "kappa",
        ],
    ),
    "correlate": (
        "correlation_sweep_samples.csv",
        ["t", "re", "im", "prediction", "residual"],
    ),
}

KINDS = tuple(TABLES)


class SchemaError(ValueError):
    """Input table does not match the documented header."""

    def __init__(self, path, missing, unexpected):
        self.path = str(path)
        self.missing = list(missing)
        self.unexpected = list(unexpected)
        parts = [f"schema mismatch in {path}"]
        if self.missing:
            parts.append(f"missing columns: {', '.join(self.missing)}")
        if self.unexpected:
            parts.append(f"unexpected columns: {', '.join(self.unexpected)}")
        super().__init__("; ".join(parts))


@dataclass(frozen=True)
class Table:
    path: str
    columns: list[str]
    rows: list[dict]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def _parse(value: str):
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def read_table(path, expected_columns) -> Table:
    """Read a samples CSV, validating the header against the contract."""
    if not os.path.exists(path):
        raise SchemaError(path, expected_columns, [])
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, expected_columns, []) from None
        missing = [c for c in expected_columns if c not in header]
        unexpected = [c for c in header if c not in expected_columns]
        if missing or unexpected:
            raise SchemaError(path, missing, unexpected)
        rows = [
            {name: _parse(val) for name, val in zip(header, line)}
            for line in reader
            if line
        ]
    return Table(path=str(path), columns=header, rows=rows)


def load_kind(kind: str, in_dir) -> Table:
    if kind not in TABLES:
        raise ValueError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
    stem, cols = TABLES[kind]
    return read_table(os.path.join(in_dir, stem), cols)
