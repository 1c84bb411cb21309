"""Structured verification results shared by every check."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CheckReport", "to_jsonable"]


def to_jsonable(obj):
    """Convert numpy scalars/arrays (recursively) into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else str(x)
    return obj


@dataclass
class CheckReport:
    """Outcome of one verification run.

    ``passed`` is serialised under the key ``pass``.
    """

    name: str
    samples: int
    max_residual: float
    threshold: float
    passed: bool
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable(
            {
                "name": self.name,
                "samples": int(self.samples),
                "max_residual": float(self.max_residual),
                "threshold": float(self.threshold),
                "pass": bool(self.passed),
                "details": self.details,
            }
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(
            name=d["name"],
            samples=d["samples"],
            max_residual=float(d["max_residual"]),
            threshold=float(d["threshold"]),
            passed=bool(d["pass"]),
            details=list(d.get("details", [])),
        )

    def __bool__(self) -> bool:
        return self.passed

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.name}: max residual {self.max_residual:.3e} "
            f"(threshold {self.threshold:.1e}, {self.samples} samples)"
        )
