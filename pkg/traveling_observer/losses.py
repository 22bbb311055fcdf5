"""
traveling_observer.losses

Every loss returns ``(loss, grad)`` where ``loss`` is the mean over all
predicted entries and ``grad`` has the shape of the predictions.
"""
from __future__ import annotations
from typing import Tuple

import numpy as np

from .errors import ShapeError

LOSS_KINDS = ("mse", "bce", "squared_hinge")


def _check_same(pred: np.ndarray, target: np.ndarray, what: str) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"{what}: predictions of shape {pred.shape} vs targets {target.shape}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """
    Numerically stable logistic function.
    """
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    expx = np.exp(x[~positive])
    out[~positive] = expx / (1.0 + expx)
    return out


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    _check_same(pred, target, "mse")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def bce_loss(logits: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Binary cross-entropy on logits, ``softplus(l) - t * l`` per entry.
    """
    _check_same(logits, target, "bce")
    per_entry = np.logaddexp(0.0, logits) - target * logits
    grad = (sigmoid(logits) - target) / logits.size
    return float(np.mean(per_entry)), grad.astype(logits.dtype, copy=False)


def hinge_targets(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """
    Codes class labels as ``+1`` for the true class and ``-1`` elsewhere.
    """
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"label out of range [0, {num_classes}): found {int(labels.min())}..{int(labels.max())}"
        )
    coded = -np.ones((labels.shape[0], num_classes))
    coded[np.arange(labels.shape[0]), labels] = 1.0
    return coded


def squared_hinge_loss(scores: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean over samples and classes of ``max(0, 1 - t_k s_k)^2``.

    :param scores: Class scores of shape ``[batch, m]``.
    :param labels: Integer class indices of shape ``[batch]``.
    """
    if scores.ndim != 2 or np.shape(labels) != (scores.shape[0],):
        raise ShapeError(f"squared hinge: scores {scores.shape} vs labels {np.shape(labels)}")
    coded = hinge_targets(labels, scores.shape[1]).astype(scores.dtype)
    margins = np.maximum(0.0, 1.0 - coded * scores)
    grad = (-2.0 / scores.size) * coded * margins
    return float(np.mean(margins * margins)), grad.astype(scores.dtype, copy=False)


def compute_loss(
        kind: str,
        pred: np.ndarray,
        target: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Dispatches to the loss named by ``kind``.
    """
    if kind == "mse":
        return mse_loss(pred, target)
    if kind == "bce":
        return bce_loss(pred, target)
    if kind == "squared_hinge":
        return squared_hinge_loss(pred, target)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
