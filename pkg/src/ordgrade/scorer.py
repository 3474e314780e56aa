"""Small differentiable scorers with classification or regression heads.

A scorer maps a feature vector to 5 logits (classification) or one scalar
(regression), through an optional tanh hidden layer. Training uses AdamW
with a linear-warmup cosine schedule and keeps the epoch snapshot with the
lowest validation loss.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    IncompatibleModelError,
    InvalidInputError,
    TrainingDivergedError,
)
from .losses import NUM_CLASSES, LossKind, LossSpec, batch_loss, batch_loss_and_grad, softmax
from .metrics import MetricReport
from .seeding import derive_rng

CHECKPOINT_FORMAT = "ordgrade-checkpoint"
CHECKPOINT_VERSION = 1


class HeadKind(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class Schedule(str, enum.Enum):
    COSINE = "cosine"
    CONSTANT = "constant"


@dataclass
class ScorerModel:
    kind: HeadKind
    input_dim: int
    hidden_size: int
    params: dict[str, np.ndarray]
    num_classes: int = NUM_CLASSES

    @property
    def output_dim(self) -> int:
        return self.num_classes if self.kind is HeadKind.CLASSIFICATION else 1

    def copy(self) -> "ScorerModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def raw_forward(self, x: np.ndarray):
        """Batch forward pass returning ``(outputs, hidden_activations)``.

        Outputs have shape (n, C) for classification and (n,) for regression.
        """
        p = self.params
        if self.hidden_size:
            h = np.tanh(x @ p["W1"].T + p["b1"])
        else:
            h = x
        out = h @ p["W2"].T + p["b2"]
        if self.kind is HeadKind.REGRESSION:
            out = out[:, 0]
        return out, h

    def backward(self, x: np.ndarray, h: np.ndarray, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        g = grad_out.reshape(x.shape[0], self.output_dim)
        grads = {"W2": g.T @ h, "b2": g.sum(axis=0)}
        if self.hidden_size:
            da = (g @ p["W2"]) * (1.0 - h * h)
            grads["W1"] = da.T @ x
            grads["b1"] = da.sum(axis=0)
        return grads

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "input_dim": self.input_dim,
            "hidden_size": self.hidden_size,
            "num_classes": self.num_classes,
            "params": {k: v.tolist() for k, v in sorted(self.params.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerModel":
        return cls(
            kind=HeadKind(d["kind"]),
            input_dim=int(d["input_dim"]),
            hidden_size=int(d["hidden_size"]),
            num_classes=int(d.get("num_classes", NUM_CLASSES)),
            params={k: np.asarray(v, dtype=np.float64) for k, v in d["params"].items()},
        )


def init_model(kind, input_dim: int, hidden_size: int = 0, seed: int = 0, num_classes: int = NUM_CLASSES) -> ScorerModel:
    """Fan-in scaled uniform weights, zero biases; deterministic per seed."""
    kind = HeadKind(kind)
    if input_dim < 1 or hidden_size < 0:
        raise InvalidInputError("input_dim must be >= 1 and hidden_size >= 0")
    rng = derive_rng(seed, "init")
    out_dim = num_classes if kind is HeadKind.CLASSIFICATION else 1
    params = {}
    fan_in = input_dim
    if hidden_size:
        bound = 1.0 / math.sqrt(input_dim)
        params["W1"] = rng.uniform(-bound, bound, (hidden_size, input_dim))
        params["b1"] = np.zeros(hidden_size)
        fan_in = hidden_size
    bound = 1.0 / math.sqrt(fan_in)
    params["W2"] = rng.uniform(-bound, bound, (out_dim, fan_in))
    params["b2"] = np.zeros(out_dim)
    return ScorerModel(kind, input_dim, hidden_size, params, num_classes)


def _as_batch(model: ScorerModel, features) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise InvalidInputError(f"feature length {x.shape[-1]} does not match model input_dim {model.input_dim}")
    return x, single


def forward(model: ScorerModel, features):
    """Logits (classification) or the unclamped scalar (regression)."""
    x, single = _as_batch(model, features)
    out, _ = model.raw_forward(x)
    if single:
        return out[0] if model.kind is HeadKind.CLASSIFICATION else float(out[0])
    return out


def predict_scores(model: ScorerModel, features) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Batch version of :func:`predict_score`."""
    x, _ = _as_batch(model, features)
    out, _ = model.raw_forward(x)
    if model.kind is HeadKind.REGRESSION:
        return np.clip(out, 1.0, float(model.num_classes)), None
    dist = softmax(out)
    classes = np.arange(1, model.num_classes + 1, dtype=np.float64)
    return np.clip(dist @ classes, 1.0, float(model.num_classes)), dist


def predict_score(model: ScorerModel, features):
    """Return ``(score, distribution)``.

    Classification heads give the expected score under the softmax and the
    distribution itself; regression heads give the clamped scalar and None.
    """
    x, _ = _as_batch(model, features)
    if x.shape[0] != 1:
        raise InvalidInputError("predict_score takes one feature vector; use predict_scores")
    scores, dist = predict_scores(model, x)
    return float(scores[0]), (None if dist is None else dist[0])


def evaluate(model: ScorerModel, features, gold) -> MetricReport:
    scores, _ = predict_scores(model, features)
    return MetricReport.compute(scores, np.asarray(gold, dtype=np.float64))


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters. Defaults follow the reference LLM recipe
    (lr 2e-5, cosine, 5% warmup, AdamW, weight decay 0.005); a linear probe
    usually wants a much larger learning rate."""

    loss: LossSpec = field(default_factory=LossSpec)
    learning_rate: float = 2e-5
    weight_decay: float = 0.005
    warmup_ratio: float = 0.05
    epochs: int = 3
    batch_size: int = 16
    seed: int = 0
    schedule: Schedule = Schedule.COSINE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if isinstance(self.loss, dict):
            object.__setattr__(self, "loss", LossSpec.from_dict(self.loss))
        object.__setattr__(self, "schedule", Schedule(self.schedule))
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate must be a non-negative finite number")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ConfigError("warmup_ratio must lie in [0, 1)")
        if isinstance(self.epochs, bool) or int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError("epochs must be a positive integer")
        if isinstance(self.batch_size, bool) or int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError("batch_size must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "loss": self.loss.to_dict(),
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "warmup_ratio": self.warmup_ratio,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "schedule": self.schedule.value,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown training option(s): {', '.join(sorted(unknown))}")
        return cls(**known)


def warmup_steps(config: TrainConfig, total_steps: int) -> int:
    return min(math.ceil(config.warmup_ratio * total_steps), total_steps - 1) if total_steps > 1 else 0


def lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    """Learning rate at ``step`` of ``total_steps``.

    Linear warmup from 0 over ``ceil(warmup_ratio * total_steps)`` steps,
    then half-cosine decay reaching 0 at ``total_steps``.
    """
    if total_steps < 1 or not 0 <= step <= total_steps:
        raise InvalidInputError("need 0 <= step <= total_steps and total_steps >= 1")
    peak = config.learning_rate
    if config.schedule is Schedule.CONSTANT:
        return peak
    warm = warmup_steps(config, total_steps)
    if step < warm:
        return peak * step / warm
    progress = (step - warm) / (total_steps - warm)
    return max(0.0, peak * 0.5 * (1.0 + math.cos(math.pi * progress)))


class AdamW:
    """Adam with decoupled weight decay.

    Decay multiplies weight matrices by ``1 - lr * weight_decay`` before the
    moment update; biases are not decayed.
    """

    def __init__(self, params: dict[str, np.ndarray], weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, w in params.items():
            g = grads[k]
            if self.weight_decay and k.startswith("W"):
                w *= 1.0 - lr * self.weight_decay
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            w -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    metrics: MetricReport


@dataclass
class TrainTrace:
    steps: list[tuple[int, float, float]] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def write_step_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "lr", "train_loss"])
            for step, lr, loss in self.steps:
                w.writerow([step, repr(lr), repr(loss)])

    def write_epoch_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "pearson", "spearman", "kendall", "mae", "mse", "r2", "n"])
            for rec in self.epochs:
                m = rec.metrics.to_dict()
                w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss)]
                           + ["" if m[k] is None else repr(m[k]) for k in ("pearson", "spearman", "kendall", "mae", "mse", "r2")]
                           + [m["n"]])


def _check_head(model: ScorerModel, spec: LossSpec) -> None:
    if model.kind is HeadKind.REGRESSION and spec.kind is not LossKind.MSE:
        raise ConfigError("regression heads train with the mse loss")
    if model.kind is HeadKind.CLASSIFICATION and spec.kind is LossKind.MSE:
        raise ConfigError("classification heads need a cross-entropy or EMD loss")


def _check_xy(model, x, y, what):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError(f"{what} set must be a non-empty 2-D feature matrix")
    if x.shape[1] != model.input_dim:
        raise IncompatibleModelError(f"{what} features have dim {x.shape[1]}, model expects {model.input_dim}")
    if y.shape != (x.shape[0],):
        raise InvalidInputError(f"{what} labels do not match feature rows")
    return x, y


def validation_loss(model: ScorerModel, x, y, spec: LossSpec) -> float:
    out, _ = model.raw_forward(np.asarray(x, dtype=np.float64))
    return batch_loss(out, y, spec, model.num_classes)


def train(model: ScorerModel, train_x, train_y, val_x, val_y, config: TrainConfig):
    """Train a copy of ``model``; return ``(best_model, trace)``.

    The returned model is the end-of-epoch snapshot with the lowest
    validation loss (earliest wins ties).
    """
    spec = config.loss
    _check_head(model, spec)
    x, y = _check_xy(model, train_x, train_y, "train")
    vx, vy = _check_xy(model, val_x, val_y, "validation")

    work = model.copy()
    opt = AdamW(work.params, config.weight_decay, config.beta1, config.beta2, config.eps)
    n = x.shape[0]
    per_epoch = math.ceil(n / config.batch_size)
    total = per_epoch * config.epochs
    trace = TrainTrace()
    best = None
    best_loss = math.inf
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = derive_rng(config.seed, "shuffle", epoch).permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = x[idx]
            out, h = work.raw_forward(xb)
            if not np.all(np.isfinite(out)):
                raise TrainingDivergedError(f"non-finite model output at step {step}", trace)
            loss, gout = batch_loss_and_grad(out, y[idx], spec, work.num_classes)
            lr = lr_at(config, step, total)
            trace.steps.append((step, lr, loss))
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite training loss at step {step}", trace)
            opt.step(work.params, work.backward(xb, h, gout), lr)
            running += loss * len(idx)
            step += 1
        vloss = validation_loss(work, vx, vy, spec)
        if not math.isfinite(vloss):
            raise TrainingDivergedError(f"non-finite validation loss after epoch {epoch}", trace)
        trace.epochs.append(EpochRecord(epoch, running / n, vloss, evaluate(work, vx, vy)))
        if vloss < best_loss:
            best_loss = vloss
            best = work.copy()
            trace.best_epoch = epoch
    return best, trace


# ---------------------------------------------------------------------------
# checkpoints


def data_fingerprint(features, scores) -> str:
    h = hashlib.sha256()
    x = np.ascontiguousarray(features, dtype=np.float64)
    h.update(str(x.shape).encode())
    h.update(x.tobytes())
    h.update(np.ascontiguousarray(scores, dtype=np.int64).tobytes())
    return h.hexdigest()


def checkpoint_dict(model: ScorerModel, config: TrainConfig, fingerprint: str, extra: Optional[dict] = None) -> dict:
    d = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model.to_dict(),
        "train_config": config.to_dict(),
        "data_fingerprint": fingerprint,
    }
    if extra:
        d["extra"] = extra
    return d


def save_checkpoint(path, model: ScorerModel, config: TrainConfig, fingerprint: str, extra: Optional[dict] = None) -> str:
    """Write a JSON checkpoint; return the sha256 of its bytes."""
    payload = json.dumps(checkpoint_dict(model, config, fingerprint, extra), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(payload)
    return hashlib.sha256(payload).hexdigest()


def load_checkpoint(path):
    """Return ``(model, train_config, checkpoint_dict)``."""
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IncompatibleModelError(f"{path}: not a JSON checkpoint ({exc.msg})") from None
    if d.get("format") != CHECKPOINT_FORMAT:
        raise IncompatibleModelError(f"{path}: not an ordgrade checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise IncompatibleModelError(f"{path}: unsupported checkpoint version {d.get('version')}")
    return ScorerModel.from_dict(d["model"]), TrainConfig.from_dict(d["train_config"]), d
