"""Tabular run records shared by training, discharge, and the experiments.

An :class:`ExperimentTrace` is a small typed table: a named time-like axis
(epoch number or seconds) that must strictly increase, plus any value
columns.  Traces serialize to plain CSV with stable formatting so a rerun
of the same configuration is byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


@dataclass
class ExperimentTrace:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        if self.rows and not values[0] > self.rows[-1][0]:
            raise ValueError("time axis must be strictly increasing")
        self.rows.append(tuple(values))

    def column(self, name) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows], dtype=float)

    def final(self, name):
        return self.rows[-1][self.columns.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "ExperimentTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            columns = next(reader)
            trace = cls(columns=columns)
            for rec in reader:
                trace.rows.append(tuple(float(v) for v in rec))
        return trace
