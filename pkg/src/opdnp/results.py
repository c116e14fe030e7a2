"""Tabular results shared by the engines and the harness."""

from dataclasses import dataclass, field
import math

import numpy as np


@dataclass
class SweepResult:
    """Rectangular table of numbers with a unit per column.

    ``diagnostics`` maps a row index (or ``"global"``) to a list of messages.  Rows
    containing NaN must carry a diagnostic entry.
    """

    columns: list
    units: list
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units differ in length")
        self.rows = [tuple(float(x) for x in r) for r in self.rows]
        self.validate()

    def validate(self):
        n = len(self.columns)
        for i, r in enumerate(self.rows):
            if len(r) != n:
                raise ValueError(f"row {i} has {len(r)} values, expected {n}")
            if any(math.isnan(x) for x in r) and not self.diagnostics.get(i):
                raise ValueError(f"row {i} contains NaN without a diagnostic")

    def add_row(self, values, diagnostics=None):
        values = tuple(float(x) for x in values)
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, expected {len(self.columns)}")
        idx = len(self.rows)
        if diagnostics:
            self.diagnostics.setdefault(idx, []).extend(diagnostics)
        if any(math.isnan(x) for x in values) and not self.diagnostics.get(idx):
            raise ValueError("NaN row needs a diagnostic")
        self.rows.append(values)

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def header(self):
        return [f"{c} [{u}]" for c, u in zip(self.columns, self.units)]

    def __len__(self):
        return len(self.rows)
