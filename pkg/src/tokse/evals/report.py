"""Per-utterance metric records with recomputable corpus aggregates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def _numeric(value):
    """The float behind a cell, or None when it holds no finite number."""
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float, np.integer, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return None


@dataclass
class MetricReport:
    """A list of per-utterance dicts; aggregates are always recomputed
    from the records, never stored."""

    records: list = field(default_factory=list)

    def add(self, **fields):
        self.records.append(fields)

    def __len__(self):
        return len(self.records)

    def columns(self) -> list:
        seen: dict = {}
        for rec in self.records:
            for key in rec:
                seen.setdefault(key, None)
        return list(seen)

    def values(self, column: str) -> np.ndarray:
        vals = [_numeric(rec.get(column)) for rec in self.records]
        return np.array([v for v in vals if v is not None], dtype=np.float64)

    def mean(self, column: str) -> float:
        vals = self.values(column)
        if vals.size == 0:
            raise ValueError(f"no numeric values in column {column!r}")
        return float(vals.mean())

    def median(self, column: str) -> float:
        vals = self.values(column)
        if vals.size == 0:
            raise ValueError(f"no numeric values in column {column!r}")
        return float(np.median(vals))

    def aggregates(self) -> dict:
        out = {"mean": {}, "median": {}}
        for col in self.columns():
            vals = self.values(col)
            if vals.size:
                out["mean"][col] = float(vals.mean())
                out["median"][col] = float(np.median(vals))
        return out

    def to_csv(self, path):
        cols = self.columns()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, restval="")
            writer.writeheader()
            for rec in self.records:
                writer.writerow({k: _cell(v) for k, v in rec.items()})

    @classmethod
    def from_csv(cls, path) -> "MetricReport":
        report = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                report.records.append({k: _parse(v) for k, v in row.items()})
        return report


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (np.integer, np.floating)):
        value = value.item()
    return value


def _parse(text: str):
    if text == "":
        return None
    if text == "True":
        return True
    if text == "False":
        return False
    try:
        as_float = float(text)
    except ValueError:
        return text
    if as_float.is_integer() and "." not in text and "e" not in text.lower():
        return int(text)
    return as_float
