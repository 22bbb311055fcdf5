"""
traveling_observer.params
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Iterable, Tuple

import numpy as np

from .errors import ShapeError

DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(eq=False)
class ParamTensor:
    """
    A named array of trainable values paired with a gradient buffer of
    identical shape.

    ``decay`` marks whether weight decay applies to the tensor; variable
    embeddings are registered with ``decay=False``.  ``row_sparse``
    tensors are updated row by row: a row whose gradient is all zero is
    left untouched by the optimizer.
    """
    name: str
    values: np.ndarray
    grad: np.ndarray = field(init=False)
    decay: bool = True
    row_sparse: bool = False

    def __post_init__(self) -> None:
        self.grad = np.zeros_like(self.values)

    def __repr__(self) -> str:
        return f"<ParamTensor({self.name}, {self.shape})>"

    @property
    def shape(self) -> Tuple[int, ...]:
        """
        The shape shared by ``values`` and ``grad``.
        """
        return tuple(self.values.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def assign(self, values: np.ndarray) -> None:
        """
        Overwrites the values in place, keeping dtype and shape.
        """
        values = np.asarray(values)
        if values.shape != self.values.shape:
            raise ShapeError(
                f"cannot assign {values.shape} to parameter {self.name} of shape {self.shape}"
            )
        self.values[...] = values


def zero_grads(params: Iterable[ParamTensor]) -> None:
    """
    Resets every gradient buffer to zero.
    """
    for param in params:
        param.zero_grad()


def count_parameters(params: Iterable[ParamTensor]) -> int:
    return sum(p.size for p in params)
