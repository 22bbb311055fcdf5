"""
traveling_observer.layers

Fully-connected building blocks with explicit forward and backward
passes.  Each layer caches what its backward pass needs during
``forward``; calling ``backward`` without a preceding ``forward`` is a
hard error.
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ShapeError
from .params import ParamTensor
from .rng import Rng


@dataclass
class ForwardContext:
    """
    Per-call settings shared by every layer of a forward pass.

    :param training: Dropout is only active in training mode.
    :param generator: Source of dropout masks, derived from the step's
                      substream.  Required when training with dropout.
    """
    training: bool = False
    generator: Optional[np.random.Generator] = None


EVAL = ForwardContext(training=False)


def affine_forward(x: np.ndarray, W: ParamTensor, b: ParamTensor) -> np.ndarray:
    """
    Computes ``x @ W + b`` row-wise for ``x`` of shape ``[batch, in]``.
    """
    if x.ndim != 2 or W.values.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeError(
            f"affine input of shape {x.shape} does not match weight of shape {W.shape}"
        )
    if b.shape != (W.shape[1],):
        raise ShapeError(f"affine bias of shape {b.shape} does not match weight of shape {W.shape}")
    return x @ W.values + b.values


def affine_backward(
        upstream: np.ndarray,
        x: Optional[np.ndarray],
        W: ParamTensor,
        b: ParamTensor
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Back-propagates through :func:`affine_forward`.  The weight and bias
    gradients are accumulated into ``W.grad`` and ``b.grad`` and also
    returned.

    :returns: ``(grad_x, grad_W, grad_b)``
    """
    if x is None:
        raise RuntimeError("affine backward called without a cached forward input")
    if upstream.shape != (x.shape[0], W.shape[1]):
        raise ShapeError(
            f"affine upstream of shape {upstream.shape} does not match output shape "
            f"{(x.shape[0], W.shape[1])}"
        )
    grad_W = x.T @ upstream
    grad_b = upstream.sum(axis=0)
    W.grad += grad_W
    b.grad += grad_b
    return upstream @ W.values.T, grad_W, grad_b


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return np.where(mask, x, 0.0).astype(x.dtype, copy=False), mask


def relu_backward(upstream: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is None:
        raise RuntimeError("relu backward called without a cached forward mask")
    return np.where(mask, upstream, 0.0).astype(upstream.dtype, copy=False)


def dropout_forward(
        x: np.ndarray,
        rate: float,
        training: bool,
        generator: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Inverted dropout: kept activations are divided by ``1 - rate`` so
    that evaluation mode is the identity.

    :returns: The output and the scaled keep-mask (``None`` when the
              call was the identity).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if generator is None:
        raise RuntimeError("dropout in training mode needs a generator")
    keep = generator.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(upstream: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is None:
        return upstream
    return upstream * mask


class Affine:
    """
    A fully-connected layer ``y = x W + b`` applied over the last axis.

    Weights and bias are drawn uniformly from ``±1/sqrt(fan_in)`` out of
    the substream keyed by the layer name.
    """
    init_scheme = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))"

    def __init__(
            self,
            name: str,
            fan_in: int,
            fan_out: int,
            rng: Rng,
            dtype: type = np.float64
    ) -> None:
        self.name = name
        self.fan_in = fan_in
        self.fan_out = fan_out
        bound = 1.0 / math.sqrt(fan_in)
        gen = rng.derive("init", name)
        self.weight = ParamTensor(
            f"{name}.weight", gen.uniform(-bound, bound, (fan_in, fan_out)).astype(dtype)
        )
        self.bias = ParamTensor(f"{name}.bias", gen.uniform(-bound, bound, fan_out).astype(dtype))
        self._cache: Optional[np.ndarray] = None
        self._lead: Tuple[int, ...] = ()

    def __repr__(self) -> str:
        return f"<Affine({self.name}, {self.fan_in} -> {self.fan_out})>"

    def parameters(self) -> List[ParamTensor]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.fan_in:
            raise ShapeError(
                f"{self.name}: input of shape {x.shape} does not match weight of shape "
                f"{self.weight.shape}"
            )
        self._lead = x.shape[:-1]
        flat = x.reshape(-1, self.fan_in)
        self._cache = flat
        return affine_forward(flat, self.weight, self.bias).reshape(self._lead + (self.fan_out,))

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        flat = upstream.reshape(-1, self.fan_out)
        grad_x, _, _ = affine_backward(flat, self._cache, self.weight, self.bias)
        return grad_x.reshape(self._lead + (self.fan_in,))


class Relu:
    def __init__(self) -> None:
        self._mask: Optional[np.ndarray] = None
        self.preactivation: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._mask = relu_forward(x)
        self.preactivation = x
        return y

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return relu_backward(upstream, self._mask)

    def margin(self) -> float:
        """
        Smallest distance of a cached pre-activation from the kink at 0.
        """
        if self.preactivation is None or self.preactivation.size == 0:
            return math.inf
        return float(np.min(np.abs(self.preactivation)))


class Dropout:
    def __init__(self, rate: float) -> None:
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self._mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray, ctx: ForwardContext) -> np.ndarray:
        y, self._mask = dropout_forward(x, self.rate, ctx.training, ctx.generator)
        return y

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return dropout_backward(upstream, self._mask)
