"""Verification reports and deterministic CSV output."""

from __future__ import annotations

import os
from dataclasses import dataclass, field


def fmt(value) -> str:
    """Canonical cell formatting so reruns produce byte-identical files."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12e}"
    return str(value)


@dataclass
class VerificationReport:
    """Named check with measured rows, fitted constants and a pass flag."""

    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    fitted: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    passed: bool = True

    def add_row(self, **kv) -> None:
        self.rows.append(kv)

    def require(self, condition: bool, note: str) -> bool:
        """Record a named condition; the report fails if it does not hold."""
        if not condition:
            self.passed = False
            self.notes.append(f"FAILED: {note}")
        else:
            self.notes.append(f"ok: {note}")
        return condition

    def write_csv(self, path) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(fmt(row.get(c, "")) for c in self.columns) + "\n")

    def write_dat(self, path, columns=None) -> None:
        """Gnuplot-friendly whitespace table with a commented header."""
        cols = columns or self.columns
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            fh.write("# " + " ".join(cols) + "\n")
            for row in self.rows:
                fh.write(" ".join(fmt(row.get(c, "nan")) for c in cols) + "\n")

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extras = " ".join(f"{k}={fmt(v)}" for k, v in sorted(self.fitted.items()))
        return f"{self.name}: {status} ({len(self.rows)} rows) {extras}".rstrip()
