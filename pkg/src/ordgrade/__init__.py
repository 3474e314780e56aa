"""Ordinal grading toolkit: CDF-based EMD losses, desk-scale scorer heads,
and absolute/relative judge metrics."""

from ._backend import BACKEND
from .losses import (
    NUM_CLASSES,
    LossKind,
    LossSpec,
    Reduction,
    batch_loss,
    cdf,
    cross_entropy,
    generalized_emd,
    loss_gradient,
    normalized_emd,
    softmax,
    squared_emd,
)
from .metrics import MetricReport, error_metrics, kendall_tau, pearson, spearman

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "NUM_CLASSES",
    "LossKind",
    "LossSpec",
    "MetricReport",
    "Reduction",
    "batch_loss",
    "cdf",
    "cross_entropy",
    "error_metrics",
    "generalized_emd",
    "kendall_tau",
    "loss_gradient",
    "normalized_emd",
    "pearson",
    "softmax",
    "spearman",
    "squared_emd",
]
