"""
traveling_observer.deep_residual

Deep residual baseline: every task owns a linear input layer and a linear
output layer around a trunk of core residual blocks.  In multi-task mode
the trunk is shared by all registered tasks.
"""
from __future__ import annotations
from typing import Dict, List, Optional, Tuple

import numpy as np

from .blocks import ResidualBlock
from .errors import ShapeError, UnknownTaskError
from .layers import EVAL, Affine, ForwardContext
from .params import ParamTensor, zero_grads
from .rng import Rng


class DrModel:
    def __init__(
            self,
            rng: Rng,
            hidden: int = 128,
            num_blocks: int = 3,
            dropout_rate: float = 0.0,
            dtype: type = np.float64
    ) -> None:
        self.hidden = hidden
        self.dtype = dtype
        self._rng = rng
        self.blocks = [
            ResidualBlock(f"trunk.block{i}", hidden, rng, dropout_rate, None, dtype)
            for i in range(num_blocks)
        ]
        self.heads: Dict[str, Tuple[Affine, Affine]] = {}
        self._active: Optional[str] = None

    def __repr__(self) -> str:
        return f"<DrModel(hidden={self.hidden}, N={len(self.blocks)}, tasks={len(self.heads)})>"

    def register_task(self, task_id: str, n_in: int, n_out: int) -> None:
        """
        Creates the task's own input (``n_in -> hidden``) and output
        (``hidden -> n_out``) layers.
        """
        if task_id in self.heads:
            raise ValueError(f"task {task_id!r} is already registered")
        self.heads[task_id] = (
            Affine(f"head.{task_id}.input", n_in, self.hidden, self._rng, self.dtype),
            Affine(f"head.{task_id}.output", self.hidden, n_out, self._rng, self.dtype),
        )

    def head(self, task_id: str) -> Tuple[Affine, Affine]:
        try:
            return self.heads[task_id]
        except KeyError:
            raise UnknownTaskError(f"task {task_id!r} has no registered head") from None

    def trunk_parameters(self) -> List[ParamTensor]:
        return [p for block in self.blocks for p in block.parameters()]

    def parameters(self) -> List[ParamTensor]:
        params = self.trunk_parameters()
        for first, last in self.heads.values():
            params += first.parameters() + last.parameters()
        return params

    def zero_grads(self) -> None:
        zero_grads(self.parameters())

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return {p.name: p.values for p in self.parameters()}

    def forward(self, task_id: str, x: np.ndarray, ctx: ForwardContext = EVAL) -> np.ndarray:
        """
        :param x: Task inputs of shape ``[batch, n_in]``.
        :returns: Shape ``[batch, n_out]``.
        """
        first, last = self.head(task_id)
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != first.fan_in:
            raise ShapeError(
                f"task {task_id}: input of shape {x.shape}, expected {first.fan_in} columns"
            )
        h = first.forward(x)
        for block in self.blocks:
            h = block.forward(h, None, ctx)
        self._active = task_id
        return last.forward(h)

    def backward(self, grad_output: np.ndarray) -> None:
        if self._active is None:
            raise RuntimeError("DrModel.backward called without a preceding forward")
        first, last = self.head(self._active)
        self._active = None
        g = last.backward(np.asarray(grad_output, dtype=self.dtype))
        for block in reversed(self.blocks):
            g, _ = block.backward(g)
        first.backward(g)


def dr_forward(
        model: DrModel,
        task_id: str,
        x: np.ndarray,
        ctx: ForwardContext = EVAL
) -> np.ndarray:
    return model.forward(task_id, x, ctx)
