"""Train several head/loss configurations on identical splits and compare them."""

from __future__ import annotations

import csv
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import SplitSpec, split
from .errors import InvalidInputError, OrdgradeError
from .losses import LossKind, LossSpec
from .metrics import MetricReport
from .scorer import HeadKind, TrainConfig, evaluate, init_model, train

METRIC_KEYS = ("pearson", "spearman", "kendall", "mae", "mse", "r2")


@dataclass(frozen=True)
class HeadConfig:
    name: str
    kind: HeadKind
    loss: LossSpec
    hidden_size: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", HeadKind(self.kind))
        if isinstance(self.loss, dict):
            object.__setattr__(self, "loss", LossSpec.from_dict(self.loss))

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind.value, "loss": self.loss.to_dict(),
                "hidden_size": self.hidden_size, "overrides": dict(self.overrides)}

    @classmethod
    def from_dict(cls, d: dict) -> "HeadConfig":
        return cls(d["name"], d["kind"], LossSpec.from_dict(d["loss"]), int(d.get("hidden_size", 0)),
                   dict(d.get("overrides", {})))


def default_heads() -> list[HeadConfig]:
    return [
        HeadConfig("ce", HeadKind.CLASSIFICATION, LossSpec(LossKind.CROSS_ENTROPY)),
        HeadConfig("squared_emd", HeadKind.CLASSIFICATION, LossSpec(LossKind.SQUARED_EMD)),
        HeadConfig("regression_mse", HeadKind.REGRESSION, LossSpec(LossKind.MSE)),
    ]


@dataclass
class RunResult:
    head: str
    seed: int
    report: Optional[MetricReport]
    best_epoch: int = 0
    curve: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    error: Optional[str] = None


@dataclass
class ComparisonResult:
    heads: list[HeadConfig]
    seeds: list[int]
    runs: list[RunResult]

    def runs_for(self, head: str) -> list[RunResult]:
        return [r for r in self.runs if r.head == head]

    def median(self, head: str, key: str) -> Optional[float]:
        values = [r.report.to_dict()[key] for r in self.runs_for(head) if r.report is not None]
        values = [v for v in values if v is not None]
        return statistics.median(values) if values else None

    def table(self) -> list[dict]:
        """One row per head: per-metric medians over seeds (or the single
        seed's values when only one seed ran)."""
        rows = []
        for h in self.heads:
            runs = self.runs_for(h.name)
            row = {"head": h.name, "kind": h.kind.value, "loss": h.loss.kind.value,
                   "seeds_ok": sum(r.report is not None for r in runs)}
            for key in METRIC_KEYS:
                row[key] = self.median(h.name, key)
            failures = [f"seed {r.seed}: {r.error}" for r in runs if r.error]
            row["failures"] = "; ".join(failures)
            rows.append(row)
        return rows

    @property
    def aggregated(self) -> bool:
        return len(self.seeds) > 1

    def write_table_csv(self, path) -> None:
        rows = self.table()
        agg = "median_" if self.aggregated else ""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["head", "kind", "loss", "seeds_ok"] + [agg + k for k in METRIC_KEYS] + ["failures"])
            for r in rows:
                w.writerow([r["head"], r["kind"], r["loss"], r["seeds_ok"]]
                           + ["" if r[k] is None else repr(r[k]) for k in METRIC_KEYS] + [r["failures"]])

    def write_curves_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["head", "seed", "epoch", "train_loss", "val_loss"])
            for r in self.runs:
                for epoch, tl, vl in r.curve:
                    w.writerow([r.head, r.seed, epoch, repr(tl), repr(vl)])

    def to_text(self) -> str:
        label = f"median over {len(self.seeds)} seeds" if self.aggregated else f"seed {self.seeds[0]}"
        header = f"{'head':<18}" + "".join(f"{k:>10}" for k in METRIC_KEYS)
        lines = [f"held-out metrics ({label})", header]
        for r in self.table():
            cells = "".join(f"{'undefined' if r[k] is None else format(r[k], '.4f'):>10}" for k in METRIC_KEYS)
            lines.append(f"{r['head']:<18}{cells}")
            if r["failures"]:
                lines.append(f"  failed: {r['failures']}")
        return "\n".join(lines)


def _run_one(head: HeadConfig, seed: int, base: TrainConfig, data) -> RunResult:
    tx, ty, vx, vy, hx, hy = data
    config = replace(base, loss=head.loss, seed=seed, **head.overrides)
    model = init_model(head.kind, tx.shape[1], head.hidden_size, seed)
    try:
        best, trace = train(model, tx, ty, vx, vy, config)
    except OrdgradeError as exc:
        return RunResult(head.name, seed, None, error=f"{type(exc).__name__}: {exc}")
    curve = [(e.epoch, e.train_loss, e.val_loss) for e in trace.epochs]
    return RunResult(head.name, seed, evaluate(best, hx, hy), trace.best_epoch, curve)


def seed_splits(features, scores, seed: int, train_fraction: float):
    """(train, validation, held-out) arrays. The held-out part is cut first;
    validation (model selection) comes out of the remainder."""
    idx = list(range(len(scores)))
    rest, held = split(idx, SplitSpec(train_fraction, seed))
    tr, va = split(rest, SplitSpec(train_fraction, seed + 1_000_003))
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(scores, dtype=np.int64)
    return x[tr], y[tr], x[va], y[va], x[held], y[held]


def compare_losses(features, scores, heads: Sequence[HeadConfig], base: TrainConfig,
                   seeds: Sequence[int], train_fraction: float = 0.95, jobs: int = 1) -> ComparisonResult:
    if len(heads) < 2:
        raise InvalidInputError("need at least two head configurations to compare")
    if not seeds:
        raise InvalidInputError("need at least one seed")
    names = [h.name for h in heads]
    if len(set(names)) != len(names):
        raise InvalidInputError("head names must be unique")
    tasks = []
    for seed in seeds:
        data = seed_splits(features, scores, seed, train_fraction)
        tasks.extend((h, seed, base, data) for h in heads)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_one, *zip(*tasks)))
    else:
        runs = [_run_one(*t) for t in tasks]
    return ComparisonResult(list(heads), list(seeds), runs)
