"""Absolute-grading metrics: correlations and error measures.

Correlations are ``None`` when undefined (fewer than two rows or a
constant column). Reports print such values as ``undefined``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError


def _columns(predicted, gold):
    x = np.asarray(predicted, dtype=np.float64).reshape(-1)
    y = np.asarray(gold, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise InvalidInputError(f"column lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("scores must be finite")
    return x, y


def pearson(predicted, gold) -> Optional[float]:
    x, y = _columns(predicted, gold)
    if x.shape[0] < 2 or x.min() == x.max() or y.min() == y.max():
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(values) -> np.ndarray:
    """1-based ranks, ties sharing the mean of the ranks they span."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    ranks = np.empty(v.shape[0], dtype=np.float64)
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], v.shape[0]]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e - 1) + 1.0
    return ranks


def spearman(predicted, gold) -> Optional[float]:
    x, y = _columns(predicted, gold)
    if x.shape[0] < 2:
        return None
    return pearson(average_ranks(x), average_ranks(y))


def kendall_tau(predicted, gold) -> Optional[float]:
    """Tie-corrected Kendall tau-b over all row pairs."""
    x, y = _columns(predicted, gold)
    n = x.shape[0]
    if n < 2:
        return None
    s, tied_x, tied_y = kernels.kendall_counts(x, y)
    n0 = n * (n - 1) // 2
    denom = (n0 - tied_x) * (n0 - tied_y)
    if denom == 0:
        return None
    tau = s / math.sqrt(denom)
    return max(-1.0, min(1.0, tau))


def error_metrics(predicted, gold) -> tuple[float, float, Optional[float]]:
    """Return ``(mae, mse, r_squared)``; r_squared is None for constant gold."""
    x, y = _columns(predicted, gold)
    if x.shape[0] < 1:
        raise InvalidInputError("error metrics need at least one row")
    r = x - y
    mae = float(np.mean(np.abs(r)))
    mse = float(np.mean(r * r))
    dy = y - y.mean()
    ss_tot = float(np.dot(dy, dy))
    r2 = None if x.shape[0] < 2 or y.min() == y.max() else 1.0 - float(np.dot(r, r)) / ss_tot
    return mae, mse, r2


@dataclass(frozen=True)
class MetricReport:
    pearson: Optional[float]
    spearman: Optional[float]
    kendall: Optional[float]
    mae: float
    mse: float
    r_squared: Optional[float]
    n: int

    @classmethod
    def compute(cls, predicted, gold) -> "MetricReport":
        mae, mse, r2 = error_metrics(predicted, gold)
        return cls(
            pearson=pearson(predicted, gold),
            spearman=spearman(predicted, gold),
            kendall=kendall_tau(predicted, gold),
            mae=mae,
            mse=mse,
            r_squared=r2,
            n=int(np.size(predicted)),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r2"] = d.pop("r_squared")
        return {k: d[k] for k in ("pearson", "spearman", "kendall", "mae", "mse", "r2", "n")}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(d["pearson"], d["spearman"], d["kendall"], d["mae"], d["mse"], d["r2"], d["n"])

    def to_text(self) -> str:
        """Flat ``key=value`` record, one field per line."""
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                text = "undefined"
            elif key == "n":
                text = str(value)
            else:
                text = f"{value:.6f}"
            lines.append(f"{key}={text}")
        return "\n".join(lines)
