"""
traveling_observer.optim
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from .params import ParamTensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Bias-corrected Adam with L2 weight decay added to the gradient.

    Moments are keyed by parameter name, so the trajectory of a parameter
    does not depend on the order in which parameters are passed.
    """
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    row_steps: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.weight_decay < 0:
            raise ValueError(f"weight decay must be non-negative, got {self.weight_decay}")


def _moments(state: AdamState, param: ParamTensor) -> Tuple[np.ndarray, np.ndarray]:
    m = state.m.get(param.name)
    if m is None:
        m = state.m[param.name] = np.zeros_like(param.values)
        state.v[param.name] = np.zeros_like(param.values)
    if m.shape != param.values.shape:
        raise ValueError(f"moment shape {m.shape} does not match parameter {param.name}")
    return m, state.v[param.name]


def _sparse_row_step(state: AdamState, param: ParamTensor) -> None:
    rows = np.flatnonzero(np.any(param.grad != 0, axis=tuple(range(1, param.grad.ndim))))
    if rows.size == 0:
        return
    m, v = _moments(state, param)
    steps = state.row_steps.get(param.name)
    if steps is None or steps.shape[0] != param.values.shape[0]:
        steps = state.row_steps[param.name] = np.zeros(param.values.shape[0], dtype=np.int64)
    steps[rows] += 1

    grad = param.grad[rows]
    if state.weight_decay and param.decay:
        grad = grad + state.weight_decay * param.values[rows]
    m[rows] = state.beta1 * m[rows] + (1.0 - state.beta1) * grad
    v[rows] = state.beta2 * v[rows] + (1.0 - state.beta2) * (grad * grad)

    t = steps[rows].reshape((-1,) + (1,) * (param.values.ndim - 1))
    m_hat = m[rows] / (1.0 - state.beta1 ** t)
    v_hat = v[rows] / (1.0 - state.beta2 ** t)
    param.values[rows] -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(
        param.values.dtype, copy=False
    )


def adam_step(state: AdamState, params: Sequence[ParamTensor]) -> None:
    """
    Applies one Adam update to every parameter from its accumulated
    gradient.  Parameters with ``decay=False`` (variable embeddings) are
    exempt from weight decay.  Row-sparse parameters only update the
    rows that received gradient, each with its own step count.
    """
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t

    for param in params:
        if param.row_sparse:
            _sparse_row_step(state, param)
            continue
        grad = param.grad
        if state.weight_decay and param.decay:
            grad = grad + state.weight_decay * param.values

        m, v = _moments(state, param)
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)

        m_hat = m / correction1
        v_hat = v / correction2
        param.values -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(
            param.values.dtype, copy=False
        )
