"""CDF-based Earth Mover's Distance losses for ordinal score classes.

Two entry points exist. The distribution-level functions (``squared_emd``,
``generalized_emd``, ``normalized_emd``, ``cross_entropy``) take probability
vectors and are used by metrics and oracles. The logits-level functions
(``batch_loss``, ``batch_loss_and_grad``, ``loss_gradient``) take raw model
outputs so that gradients flow through the softmax; those route through the
compiled kernel when available.

Score classes are 1-based ordinals (``1..num_classes``) at every public
boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError, InvalidLabelError, InvalidParameterError

NUM_CLASSES = 5
PROB_TOL = 1e-9
CE_CLAMP = 1e-12
GRAD_FLOOR = 1e-12


class LossKind(str, enum.Enum):
    CROSS_ENTROPY = "cross_entropy"
    SQUARED_EMD = "squared_emd"
    GENERALIZED_EMD = "generalized_emd"
    NORMALIZED_EMD = "normalized_emd"
    MSE = "mse"


class Reduction(str, enum.Enum):
    SAMPLE_MEAN = "sample_mean"
    CLASS_SUM_BATCH_MEAN = "class_sum_batch_mean"


EMD_KINDS = (LossKind.SQUARED_EMD, LossKind.GENERALIZED_EMD, LossKind.NORMALIZED_EMD)


@dataclass(frozen=True)
class LossSpec:
    """Loss selection and its parameters.

    ``p_order`` and ``alpha`` apply to the generalized EMD, ``l_order`` to the
    normalized EMD. ``reduction`` controls how per-sample losses are folded
    into a batch value.
    """

    kind: LossKind = LossKind.SQUARED_EMD
    p_order: float = 2.0
    alpha: float = 2.0
    l_order: float = 2.0
    reduction: Reduction = Reduction.SAMPLE_MEAN

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        for name in ("p_order", "alpha", "l_order"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be a positive finite number, got {value}")
            object.__setattr__(self, name, value)
        if self.reduction is Reduction.CLASS_SUM_BATCH_MEAN and not self.class_additive:
            raise InvalidParameterError(
                f"class_sum_batch_mean needs a loss that is a plain sum over classes; "
                f"{self.kind.value} with these parameters is not"
            )

    @property
    def class_additive(self) -> bool:
        """True when the per-sample loss is a sum of per-class terms."""
        if self.kind is LossKind.SQUARED_EMD:
            return True
        if self.kind is LossKind.GENERALIZED_EMD:
            return self.alpha == self.p_order
        if self.kind is LossKind.NORMALIZED_EMD:
            return self.l_order == 1.0
        return False

    @property
    def is_regression(self) -> bool:
        return self.kind is LossKind.MSE

    def kernel_params(self, num_classes: int = NUM_CLASSES) -> tuple[float, float, float]:
        """(p, alpha, scale) such that the kernel computes this EMD kind."""
        if self.kind is LossKind.SQUARED_EMD:
            return 2.0, 2.0, 1.0
        if self.kind is LossKind.GENERALIZED_EMD:
            return self.p_order, self.alpha, 1.0
        if self.kind is LossKind.NORMALIZED_EMD:
            return self.l_order, 1.0, (1.0 / num_classes) ** (1.0 / self.l_order)
        raise InvalidParameterError(f"{self.kind.value} is not an EMD loss")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "p_order": self.p_order,
            "alpha": self.alpha,
            "l_order": self.l_order,
            "reduction": self.reduction.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        return cls(**data)


# ---------------------------------------------------------------------------
# validation helpers


def as_distribution(probs, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Validate and return ``probs`` as a float64 probability vector."""
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (num_classes,):
        raise InvalidInputError(f"expected {num_classes} class probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidInputError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InvalidInputError(f"probabilities must sum to 1, got {p.sum():.12g}")
    return p


def as_logits(logits, num_classes: int = NUM_CLASSES) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1:] != (num_classes,):
        raise InvalidInputError(f"expected {num_classes} logits, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits must be finite")
    return z


def check_classes(gold, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Validate 1-based ordinal labels; return them as an int64 array."""
    g = np.asarray(gold)
    if g.size and not np.issubdtype(g.dtype, np.integer):
        if not np.all(np.asarray(g, dtype=np.float64) == np.round(g)):
            raise InvalidLabelError("score classes must be integers")
    g = g.astype(np.int64)
    if np.any(g < 1) or np.any(g > num_classes):
        raise InvalidLabelError(f"score classes must lie in 1..{num_classes}")
    return g


def one_hot(score: int, num_classes: int = NUM_CLASSES) -> np.ndarray:
    (g,) = check_classes([score], num_classes)
    t = np.zeros(num_classes)
    t[g - 1] = 1.0
    return t


# ---------------------------------------------------------------------------
# distribution-level functions


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cdf(dist, num_classes: int = NUM_CLASSES) -> np.ndarray:
    p = as_distribution(dist, num_classes)
    return np.cumsum(p)


def _cdf_gap(pred, gt, num_classes: int) -> np.ndarray:
    p = as_distribution(pred, num_classes)
    t = as_distribution(gt, num_classes)
    d = np.cumsum(p) - np.cumsum(t)
    d[-1] = 0.0  # both CDFs end at 1; drop the rounding residue
    return d


def squared_emd(pred, gt, num_classes: int = NUM_CLASSES) -> float:
    """Sum of squared CDF differences between two score distributions."""
    d = _cdf_gap(pred, gt, num_classes)
    return float(np.dot(d, d))


def generalized_emd(pred, gt, p_order: float = 2.0, alpha: float = 2.0, num_classes: int = NUM_CLASSES) -> float:
    """``(sum |dCDF_i| ** p_order) ** (alpha / p_order)``.

    With ``p_order == alpha == 2`` this is exactly :func:`squared_emd`;
    with both equal to 1 it is the 1-D transport cost for unit-spaced scores.
    """
    if not p_order > 0 or not alpha > 0:
        raise InvalidParameterError("p_order and alpha must be positive")
    d = np.abs(_cdf_gap(pred, gt, num_classes))
    if p_order == 2.0 and alpha == 2.0:
        return float(np.dot(d, d))
    return float(np.sum(d**p_order) ** (alpha / p_order))


def normalized_emd(pred, gt, l_order: float = 2.0, num_classes: int = NUM_CLASSES) -> float:
    """``(1/C) ** (1/l) * ||dCDF||_l``; always within [0, 1]."""
    if not l_order > 0:
        raise InvalidParameterError("l_order must be positive")
    d = np.abs(_cdf_gap(pred, gt, num_classes))
    return float((1.0 / num_classes) ** (1.0 / l_order) * np.sum(d**l_order) ** (1.0 / l_order))


def cross_entropy(pred, gt_class: int, num_classes: int = NUM_CLASSES) -> float:
    p = as_distribution(pred, num_classes)
    (g,) = check_classes([gt_class], num_classes)
    return float(-math.log(max(p[g - 1], CE_CLAMP)))


# ---------------------------------------------------------------------------
# logits-level batch functions


def _prepare(outputs, gold, spec: LossSpec, num_classes: int):
    g = check_classes(gold, num_classes)
    if g.ndim != 1 or g.size == 0:
        raise InvalidInputError("batch must be a non-empty sequence of labels")
    if spec.is_regression:
        y = np.asarray(outputs, dtype=np.float64).reshape(-1)
    else:
        y = as_logits(outputs, num_classes)
        if y.ndim == 1:
            y = y[None, :]
    if y.shape[0] != g.shape[0]:
        raise InvalidInputError(f"{y.shape[0]} outputs but {g.shape[0]} labels")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("model outputs must be finite")
    return y, g


def _cross_entropy_rows(z, g, want_grad):
    m = z.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z - m), axis=1)) + m[:, 0]
    rows = np.arange(z.shape[0])
    nll = lse - z[rows, g - 1]
    clamp = -math.log(CE_CLAMP)
    loss = np.minimum(nll, clamp)
    if not want_grad:
        return loss, None
    grad = softmax(z)
    grad[rows, g - 1] -= 1.0
    grad[nll > clamp] = 0.0
    return loss, grad


def sample_losses_and_grads(outputs, gold, spec: LossSpec, num_classes: int = NUM_CLASSES, want_grad: bool = True):
    """Per-sample losses and per-sample gradients w.r.t. the model outputs."""
    y, g = _prepare(outputs, gold, spec, num_classes)
    if spec.kind is LossKind.MSE:
        r = y - g
        return r * r, (2.0 * r if want_grad else None)
    if spec.kind is LossKind.CROSS_ENTROPY:
        return _cross_entropy_rows(y, g, want_grad)
    p, alpha, scale = spec.kernel_params(num_classes)
    return kernels.emd_loss_grad(y, g - 1, p, alpha, scale, GRAD_FLOOR, want_grad)


def _class_sum_batch_mean(z, g, spec: LossSpec, num_classes: int) -> float:
    # per class: sum the CDF-gap terms over the batch, then average the class sums over the batch
    x = np.cumsum(softmax(z), axis=1)
    t = (np.arange(num_classes)[None, :] >= (g - 1)[:, None]).astype(np.float64)
    p, _, scale = spec.kernel_params(num_classes)
    class_sums = np.sum(np.abs(x - t) ** p, axis=0)
    return float(scale * class_sums.sum() / z.shape[0])


def batch_loss(outputs, gold, spec: LossSpec, num_classes: int = NUM_CLASSES) -> float:
    y, g = _prepare(outputs, gold, spec, num_classes)
    if spec.reduction is Reduction.CLASS_SUM_BATCH_MEAN:
        return _class_sum_batch_mean(y, g, spec, num_classes)
    losses, _ = sample_losses_and_grads(y, g, spec, num_classes, want_grad=False)
    return float(np.mean(losses))


def batch_loss_and_grad(outputs, gold, spec: LossSpec, num_classes: int = NUM_CLASSES):
    """Batch loss and its gradient w.r.t. every row of ``outputs``.

    Both reductions share a gradient: the class-sum form is a reordering of
    the same double sum.
    """
    losses, grads = sample_losses_and_grads(outputs, gold, spec, num_classes)
    n = losses.shape[0]
    if spec.reduction is Reduction.CLASS_SUM_BATCH_MEAN:
        y, g = _prepare(outputs, gold, spec, num_classes)
        value = _class_sum_batch_mean(y, g, spec, num_classes)
    else:
        value = float(np.mean(losses))
    return value, grads / n


def loss_gradient(logits, gt_class: int, spec: LossSpec, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Analytic d(loss)/d(logits) for a single sample."""
    if spec.is_regression:
        raise InvalidParameterError("loss_gradient takes logits; use a classification loss kind")
    z = as_logits(logits, num_classes)
    _, grads = sample_losses_and_grads(z[None, :], [gt_class], spec, num_classes)
    return grads[0]
