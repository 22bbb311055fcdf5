"""
traveling_observer.blocks
"""
from __future__ import annotations
from typing import List, Optional, Tuple

import numpy as np

from .film import FilmLayer
from .layers import EVAL, Affine, Dropout, ForwardContext, Relu
from .params import ParamTensor
from .rng import Rng


class ResidualBlock:
    """
    A two-layer residual block whose branch is scaled by a trainable
    scalar ``alpha`` initialized to 0 (SkipInit), so a fresh block is the
    identity.

    With ``cond_dim`` set the block is FiLM-conditioned (FRB): each
    sublayer runs affine, ReLU, FiLM, dropout.  Without it the block is a
    core block (CRB): affine, ReLU, dropout.
    """
    def __init__(
            self,
            name: str,
            width: int,
            rng: Rng,
            dropout_rate: float = 0.0,
            cond_dim: Optional[int] = None,
            dtype: type = np.float64
    ) -> None:
        self.name = name
        self.kind = "FRB" if cond_dim else "CRB"
        self.fc1 = Affine(f"{name}.fc1", width, width, rng, dtype)
        self.fc2 = Affine(f"{name}.fc2", width, width, rng, dtype)
        self.relu1, self.relu2 = Relu(), Relu()
        self.drop1, self.drop2 = Dropout(dropout_rate), Dropout(dropout_rate)
        self.film1: Optional[FilmLayer] = None
        self.film2: Optional[FilmLayer] = None
        if cond_dim:
            self.film1 = FilmLayer(f"{name}.film1", cond_dim, width, rng, dtype)
            self.film2 = FilmLayer(f"{name}.film2", cond_dim, width, rng, dtype)
        self.alpha = ParamTensor(f"{name}.alpha", np.zeros(1, dtype=dtype))
        self._branch: Optional[np.ndarray] = None

    def __repr__(self) -> str:
        return f"<ResidualBlock({self.name}, {self.kind})>"

    def parameters(self) -> List[ParamTensor]:
        params = self.fc1.parameters() + self.fc2.parameters()
        for film in (self.film1, self.film2):
            if film is not None:
                params += film.parameters()
        return params + [self.alpha]

    def relus(self) -> List[Relu]:
        return [self.relu1, self.relu2]

    def forward(
            self,
            h: np.ndarray,
            z: Optional[np.ndarray] = None,
            ctx: ForwardContext = EVAL
    ) -> np.ndarray:
        u = self.relu1.forward(self.fc1.forward(h))
        if self.film1 is not None:
            u = self.film1.forward(u, z)
        u = self.drop1.forward(u, ctx)
        u = self.relu2.forward(self.fc2.forward(u))
        if self.film2 is not None:
            u = self.film2.forward(u, z)
        u = self.drop2.forward(u, ctx)
        self._branch = u
        return h + self.alpha.values[0] * u

    def backward(self, upstream: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        :returns: ``(grad_h, grad_z)``; ``grad_z`` is ``None`` for core
                  blocks.
        """
        if self._branch is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        self.alpha.grad[0] += np.sum(upstream * self._branch)

        grad_z = None
        g = self.drop2.backward(upstream * self.alpha.values[0])
        if self.film2 is not None:
            g, grad_z = self.film2.backward(g)
        g = self.fc2.backward(self.relu2.backward(g))
        g = self.drop1.backward(g)
        if self.film1 is not None:
            g, grad_z1 = self.film1.backward(g)
            grad_z = grad_z + grad_z1
        g = self.fc1.backward(self.relu1.backward(g))
        return upstream + g, grad_z
