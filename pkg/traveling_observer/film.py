"""
traveling_observer.film

Feature-wise linear modulation conditioned on variable embeddings.
"""
from __future__ import annotations
from typing import List, Optional, Tuple

import numpy as np

from .errors import ShapeError
from .layers import Affine
from .params import ParamTensor
from .rng import Rng


class FilmLayer:
    """
    Modulates a hidden state by ``W_scale(z) * h + W_shift(z)``.

    Hidden states are grouped per variable: ``h`` has shape
    ``[V, batch, width]`` (or ``[1, batch, width]`` to share one state
    across all ``V`` embeddings) and ``z`` has shape ``[V, C]``.
    """
    def __init__(
            self,
            name: str,
            cond_dim: int,
            width: int,
            rng: Rng,
            dtype: type = np.float64
    ) -> None:
        self.name = name
        self.width = width
        self.scale = Affine(f"{name}.scale", cond_dim, width, rng, dtype)
        self.shift = Affine(f"{name}.shift", cond_dim, width, rng, dtype)
        self._h: Optional[np.ndarray] = None
        self._s: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"<FilmLayer({self.name}, {self.scale.fan_in} -> {self.width})>"

    def parameters(self) -> List[ParamTensor]:
        return self.scale.parameters() + self.shift.parameters()

    def forward(self, h: np.ndarray, z: np.ndarray) -> np.ndarray:
        if h.ndim != 3 or h.shape[-1] != self.width:
            raise ShapeError(f"{self.name}: hidden state of shape {h.shape}, width {self.width}")
        if z.ndim != 2 or h.shape[0] not in (1, z.shape[0]):
            raise ShapeError(f"{self.name}: hidden state {h.shape} vs embeddings {z.shape}")
        s = self.scale.forward(z)
        t = self.shift.forward(z)
        self._h = h
        self._s = s
        return s[:, None, :] * h + t[:, None, :]

    def backward(self, upstream: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        :returns: ``(grad_h, grad_z)``.  ``grad_h`` has shape
                  ``[V, batch, width]`` even when the forward input was
                  shared; the caller reduces it.
        """
        if self._h is None or self._s is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        grad_h = upstream * self._s[:, None, :]
        grad_s = (upstream * self._h).sum(axis=1)
        grad_t = upstream.sum(axis=1)
        grad_z = self.scale.backward(grad_s) + self.shift.backward(grad_t)
        return grad_h, grad_z


def film_modulate(h: np.ndarray, z: np.ndarray, layer: FilmLayer) -> np.ndarray:
    """
    Applies ``layer`` to a ``[batch, hidden]`` state with a single
    embedding ``z`` of length ``C``.
    """
    return layer.forward(h[None, :, :], np.asarray(z)[None, :])[0]
