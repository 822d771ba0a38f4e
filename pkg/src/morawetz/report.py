"""Condition reports and deterministic JSON/CSV output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


class UsageError(ValueError):
    """Raised for invalid arguments (empty grids, bad configuration)."""


@dataclass
class ConditionResult:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class ConditionReport:
    """Per-condition verdicts with witness data."""

    results: list[ConditionResult] = field(default_factory=list)

    def add(self, name: str, passed: bool, **detail) -> None:
        self.results.append(ConditionResult(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> ConditionResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def merge(self, other: "ConditionReport", prefix: str = "") -> "ConditionReport":
        out = ConditionReport(list(self.results))
        for r in other.results:
            out.results.append(ConditionResult(prefix + r.name, r.passed, r.detail))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "conditions": {r.name: {"passed": r.passed, **r.detail} for r in self.results},
        }


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: str | Path, payload: Any) -> Path:
    # json emits floats with repr(), the shortest round-trip form
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: str | Path, header: Sequence[str], columns: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    cols = [np.asarray(c, dtype=float) for c in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body], dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
