"""
traveling_observer.tom

The shared predictor ``g(h(sum_i f(x_i, z_i)), z_j)``: an encoder ``f``
conditioned on input embeddings, an unconditioned core ``h`` applied once
to the aggregated encodings, and a decoder ``g`` conditioned on the
embedding of each requested output variable.
"""
from __future__ import annotations
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .blocks import ResidualBlock
from .embeddings import VariableEmbeddingTable
from .errors import UnknownVariableError
from .film import FilmLayer
from .layers import EVAL, Affine, ForwardContext, Relu
from .params import ParamTensor, zero_grads
from .rng import Rng
from .tasks import VariableId

logger = logging.getLogger(__name__)


class Encoder:
    """
    Maps a scalar value and its variable's embedding to a latent vector:
    input affine (1 -> hidden), FiLM, ``N`` conditioned residual blocks,
    output affine (hidden -> M).
    """
    def __init__(
            self,
            ve_dim: int,
            hidden: int,
            latent: int,
            num_blocks: int,
            dropout_rate: float,
            rng: Rng,
            dtype: type = np.float64
    ) -> None:
        self.input = Affine("encoder.input", 1, hidden, rng, dtype)
        self.film = FilmLayer("encoder.input_film", ve_dim, hidden, rng, dtype)
        self.blocks = [
            ResidualBlock(f"encoder.block{i}", hidden, rng, dropout_rate, ve_dim, dtype)
            for i in range(num_blocks)
        ]
        self.output = Affine("encoder.output", hidden, latent, rng, dtype)

    def parameters(self) -> List[ParamTensor]:
        params = self.input.parameters() + self.film.parameters()
        for block in self.blocks:
            params += block.parameters()
        return params + self.output.parameters()

    def forward(self, values: np.ndarray, z: np.ndarray, ctx: ForwardContext = EVAL) -> np.ndarray:
        """
        :param values: Shape ``[V, batch]``, one row per variable.
        :param z: Shape ``[V, C]``.
        :returns: Shape ``[V, batch, M]``.
        """
        h = self.film.forward(self.input.forward(values[..., None]), z)
        for block in self.blocks:
            h = block.forward(h, z, ctx)
        return self.output.forward(h)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """
        :returns: The gradient with respect to ``z``, shape ``[V, C]``.
        """
        g = self.output.backward(upstream)
        grad_z = None
        for block in reversed(self.blocks):
            g, block_grad_z = block.backward(g)
            grad_z = block_grad_z if grad_z is None else grad_z + block_grad_z
        g, film_grad_z = self.film.backward(g)
        self.input.backward(g)
        return film_grad_z if grad_z is None else grad_z + film_grad_z


class Core:
    """
    ``N`` unconditioned residual blocks on the aggregated latent.
    """
    def __init__(
            self,
            latent: int,
            num_blocks: int,
            dropout_rate: float,
            rng: Rng,
            dtype: type = np.float64
    ) -> None:
        self.blocks = [
            ResidualBlock(f"core.block{i}", latent, rng, dropout_rate, None, dtype)
            for i in range(num_blocks)
        ]

    def parameters(self) -> List[ParamTensor]:
        return [p for block in self.blocks for p in block.parameters()]

    def forward(self, x: np.ndarray, ctx: ForwardContext = EVAL) -> np.ndarray:
        for block in self.blocks:
            x = block.forward(x, None, ctx)
        return x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        for block in reversed(self.blocks):
            upstream, _ = block.backward(upstream)
        return upstream


class Decoder:
    """
    Maps the core output and an output variable's embedding to a scalar:
    input affine (M -> hidden), FiLM, ``N`` conditioned residual blocks,
    output affine (hidden -> 1).
    """
    def __init__(
            self,
            ve_dim: int,
            hidden: int,
            latent: int,
            num_blocks: int,
            dropout_rate: float,
            rng: Rng,
            dtype: type = np.float64
    ) -> None:
        self.input = Affine("decoder.input", latent, hidden, rng, dtype)
        self.film = FilmLayer("decoder.input_film", ve_dim, hidden, rng, dtype)
        self.blocks = [
            ResidualBlock(f"decoder.block{i}", hidden, rng, dropout_rate, ve_dim, dtype)
            for i in range(num_blocks)
        ]
        self.output = Affine("decoder.output", hidden, 1, rng, dtype)

    def parameters(self) -> List[ParamTensor]:
        params = self.input.parameters() + self.film.parameters()
        for block in self.blocks:
            params += block.parameters()
        return params + self.output.parameters()

    def forward(self, latent: np.ndarray, z: np.ndarray, ctx: ForwardContext = EVAL) -> np.ndarray:
        """
        :param latent: Shape ``[batch, M]``.
        :param z: Shape ``[T, C]``, one row per target variable.
        :returns: Shape ``[T, batch]``.
        """
        h = self.film.forward(self.input.forward(latent)[None, :, :], z)
        for block in self.blocks:
            h = block.forward(h, z, ctx)
        return self.output.forward(h)[..., 0]

    def backward(self, upstream: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        :returns: ``(grad_latent [batch, M], grad_z [T, C])``
        """
        g = self.output.backward(upstream[..., None])
        grad_z = None
        for block in reversed(self.blocks):
            g, block_grad_z = block.backward(g)
            grad_z = block_grad_z if grad_z is None else grad_z + block_grad_z
        g, film_grad_z = self.film.backward(g)
        grad_z = film_grad_z if grad_z is None else grad_z + film_grad_z
        return self.input.backward(g.sum(axis=0)), grad_z


class TomModel:
    """
    Encoder, core and decoder shared by every task; the only per-variable
    parameters are the rows of the embedding table.

    :param ve_table: Embeddings of every variable the model may see.
    :param hidden: Width of encoder and decoder layers.
    :param latent: Size ``M`` of the aggregated representation.
    :param num_blocks: Residual blocks ``N`` in each of encoder, core and
                       decoder.
    """
    def __init__(
            self,
            ve_table: VariableEmbeddingTable,
            rng: Rng,
            hidden: int = 128,
            latent: int = 128,
            num_blocks: int = 3,
            dropout_rate: float = 0.0,
            dtype: type = np.float64
    ) -> None:
        self.ve = ve_table
        self.hidden = hidden
        self.latent = latent
        self.num_blocks = num_blocks
        self.dtype = dtype
        self.encoder = Encoder(ve_table.dim, hidden, latent, num_blocks, dropout_rate, rng, dtype)
        self.core = Core(latent, num_blocks, dropout_rate, rng, dtype)
        self.decoder = Decoder(ve_table.dim, hidden, latent, num_blocks, dropout_rate, rng, dtype)
        self._cache: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __repr__(self) -> str:
        return (
            f"<TomModel(C={self.ve.dim}, hidden={self.hidden}, M={self.latent}, "
            f"N={self.num_blocks}, variables={len(self.ve)})>"
        )

    def network_parameters(self) -> List[ParamTensor]:
        return (
            self.encoder.parameters() + self.core.parameters() + self.decoder.parameters()
        )

    def parameters(self) -> List[ParamTensor]:
        return self.network_parameters() + self.ve.parameters()

    def zero_grads(self) -> None:
        zero_grads(self.parameters())
        self.ve.table.zero_grad()

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {p.name: p.values for p in self.network_parameters()}
        arrays[self.ve.table.name] = self.ve.table.values
        return arrays

    def relus(self) -> List[Relu]:
        blocks = self.encoder.blocks + self.core.blocks + self.decoder.blocks
        return [relu for block in blocks for relu in block.relus()]

    def relu_margin(self) -> float:
        """
        Smallest distance of any cached ReLU pre-activation from 0.
        """
        return min((relu.margin() for relu in self.relus()), default=math.inf)

    def forward(
            self,
            values: np.ndarray,
            observed: Sequence[VariableId],
            targets: Sequence[VariableId],
            ctx: ForwardContext = EVAL
    ) -> np.ndarray:
        """
        Predicts every target variable from the observed ones.

        :param values: Observed values, shape ``[batch, len(observed)]``.
        :param observed: Distinct observed variable ids.
        :param targets: Variables to predict.
        :returns: Predictions of shape ``[batch, len(targets)]``.
        """
        if len(observed) == 0:
            raise ValueError("at least one variable must be observed")
        if len(set(observed)) != len(observed):
            raise UnknownVariableError("observed variables must be distinct")
        values = np.asarray(values, dtype=self.dtype)
        if values.ndim != 2 or values.shape[1] != len(observed):
            raise ValueError(
                f"values of shape {values.shape} do not match {len(observed)} observed variables"
            )

        obs_rows = self.ve.lookup(observed)
        tgt_rows = self.ve.lookup(targets)
        order = np.argsort(obs_rows, kind="stable")
        obs_rows = obs_rows[order]
        by_variable = np.ascontiguousarray(values[:, order].T)

        encoded = self.encoder.forward(by_variable, self.ve.vectors(obs_rows), ctx)
        aggregate = encoded.sum(axis=0)
        latent = self.core.forward(aggregate, ctx)
        predictions = self.decoder.forward(latent, self.ve.vectors(tgt_rows), ctx)

        self._cache = (obs_rows, tgt_rows)
        return np.ascontiguousarray(predictions.T)

    def backward(self, grad_predictions: np.ndarray) -> None:
        """
        Accumulates gradients of every parameter, including learned
        embeddings, from the gradient of the loss with respect to the
        predictions of the last :meth:`forward`.
        """
        if self._cache is None:
            raise RuntimeError("TomModel.backward called without a preceding forward")
        obs_rows, tgt_rows = self._cache
        self._cache = None

        grad_out = np.ascontiguousarray(np.asarray(grad_predictions, dtype=self.dtype).T)
        grad_latent, grad_z_targets = self.decoder.backward(grad_out)
        grad_aggregate = self.core.backward(grad_latent)
        grad_encoded = np.broadcast_to(grad_aggregate, (obs_rows.size,) + grad_aggregate.shape)
        grad_z_observed = self.encoder.backward(grad_encoded)

        self.ve.accumulate(obs_rows, grad_z_observed)
        self.ve.accumulate(tgt_rows, grad_z_targets)


def encode_variable(
        model: TomModel,
        values: np.ndarray,
        z: np.ndarray,
        ctx: ForwardContext = EVAL
) -> np.ndarray:
    """
    Runs the encoder on a batch of values of one variable with embedding
    ``z``; returns shape ``[batch, M]``.
    """
    values = np.asarray(values, dtype=model.dtype).reshape(1, -1)
    return model.encoder.forward(values, np.asarray(z, dtype=model.dtype)[None, :], ctx)[0]


def tom_forward(
        model: TomModel,
        values: np.ndarray,
        observed: Sequence[VariableId],
        targets: Sequence[VariableId],
        ctx: ForwardContext = EVAL
) -> np.ndarray:
    return model.forward(values, observed, targets, ctx)


def tom_backward(model: TomModel, grad_predictions: np.ndarray) -> None:
    model.backward(grad_predictions)
