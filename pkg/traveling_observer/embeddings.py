"""
traveling_observer.embeddings
"""
from __future__ import annotations
import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import UnknownVariableError
from .params import ParamTensor
from .rng import Rng
from .tasks import Task, VariableId

logger = logging.getLogger(__name__)

VE_MODES = ("learned", "zero", "random", "oracle")

#: Learned entries start from N(0, 1e-3); ``variance`` reads 1e-3 as the
#: variance, ``std`` as the standard deviation.
VE_INIT_STD = {"variance": math.sqrt(1e-3), "std": 1e-3}


class VariableEmbeddingTable:
    """
    One ``C``-dimensional embedding per variable.

    All rows live in a single :class:`ParamTensor` (exempt from weight
    decay).  Rows in ``zero``, ``random`` or ``oracle`` mode are fixed:
    their gradient is masked out on every accumulation, so they never
    move.

    :param dim: Embedding size ``C``.
    :param rng: Root generator; each learned or random row draws from the
                substream keyed by its variable id.
    :param init_std: Standard deviation of learned rows at init.
    """
    def __init__(
            self,
            dim: int,
            rng: Rng,
            init_std: float = VE_INIT_STD["variance"],
            dtype: type = np.float64
    ) -> None:
        if dim < 1:
            raise ValueError(f"embedding size must be positive, got {dim}")
        self.dim = dim
        self.init_std = init_std
        self.dtype = dtype
        self._rng = rng
        self._ids: List[VariableId] = []
        self._rows: Dict[VariableId, int] = {}
        self._modes: List[str] = []
        self.table = ParamTensor(
            "ve.table", np.zeros((0, dim), dtype=dtype), decay=False, row_sparse=True
        )
        self._fixed = np.zeros(0, dtype=bool)

    def __repr__(self) -> str:
        return f"<VariableEmbeddingTable(C={self.dim}, {len(self)} variables)>"

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, var_id: object) -> bool:
        return var_id in self._rows

    @property
    def ids(self) -> List[VariableId]:
        return list(self._ids)

    @property
    def modes(self) -> List[str]:
        return list(self._modes)

    @property
    def trainable(self) -> bool:
        return not bool(np.all(self._fixed))

    def parameters(self) -> List[ParamTensor]:
        return [self.table] if len(self) and self.trainable else []

    def _initial(self, var_id: VariableId, mode: str, vector: Optional[np.ndarray]) -> np.ndarray:
        if mode == "zero":
            return np.zeros(self.dim)
        if mode == "oracle":
            if vector is None:
                raise ValueError(f"oracle embedding for {var_id.key()} needs a vector")
            return fit_to_dim(vector, self.dim)
        gen = self._rng.derive("ve", var_id.key())
        if mode == "learned":
            return gen.normal(0.0, self.init_std, self.dim)
        if mode == "random":
            return gen.standard_normal(self.dim)
        raise ValueError(f"unknown embedding mode {mode!r}; expected one of {VE_MODES}")

    def register_many(
            self,
            entries: Iterable[Tuple[VariableId, str, Optional[np.ndarray]]]
    ) -> None:
        """
        Adds ``(variable id, mode, oracle vector or None)`` entries.
        Registration must finish before an optimizer takes its first step.
        """
        rows = [self.table.values]
        fixed = [self._fixed]
        for var_id, mode, vector in entries:
            if var_id in self._rows:
                raise ValueError(f"variable {var_id.key()} already has an embedding")
            self._rows[var_id] = len(self._ids)
            self._ids.append(var_id)
            self._modes.append(mode)
            rows.append(self._initial(var_id, mode, vector).astype(self.dtype)[None, :])
            fixed.append(np.array([mode != "learned"]))
        self.table = ParamTensor(
            "ve.table", np.concatenate(rows, axis=0), decay=False, row_sparse=True
        )
        self._fixed = np.concatenate(fixed)

    def register(
            self,
            var_id: VariableId,
            mode: str = "learned",
            vector: Optional[np.ndarray] = None
    ) -> None:
        self.register_many([(var_id, mode, vector)])

    def lookup(self, var_ids: Sequence[VariableId]) -> np.ndarray:
        """
        Returns the table rows of ``var_ids``.
        """
        try:
            return np.array([self._rows[v] for v in var_ids], dtype=np.int64)
        except KeyError as error:
            raise UnknownVariableError(f"no embedding for variable {error.args[0]}") from None

    def vectors(self, rows: np.ndarray) -> np.ndarray:
        return self.table.values[rows]

    def vector(self, var_id: VariableId) -> np.ndarray:
        return self.table.values[self._rows[var_id]].copy()

    def accumulate(self, rows: np.ndarray, grad: np.ndarray) -> None:
        """
        Adds per-row gradients, summing repeated rows; fixed rows stay at
        zero gradient.
        """
        np.add.at(self.table.grad, rows, grad)
        self.table.grad[self._fixed] = 0.0

    def manifest(self) -> List[List[str]]:
        return [[v.task_id, v.name, v.role, mode] for v, mode in zip(self._ids, self._modes)]

    def to_frame(self) -> pd.DataFrame:
        """
        One row per variable with columns ``task_id, variable_name, role,
        mode, c0 .. c{C-1}``.
        """
        frame = pd.DataFrame(
            {
                "task_id": [v.task_id for v in self._ids],
                "variable_name": [v.name for v in self._ids],
                "role": [v.role for v in self._ids],
                "mode": self._modes,
            }
        )
        for c in range(self.dim):
            frame[f"c{c}"] = self.table.values[:, c].astype(np.float64)
        return frame

    def export_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def fit_to_dim(vector: Iterable[float], dim: int) -> np.ndarray:
    """
    Truncates or zero-pads ``vector`` to length ``dim``.
    """
    values = np.asarray(list(vector), dtype=np.float64)[:dim]
    out = np.zeros(dim)
    out[:values.size] = values
    return out


def make_oracle_ves(
        universe_kind: str,
        task: Task,
        dim: int = 2
) -> Dict[VariableId, np.ndarray]:
    """
    Maps every variable of ``task`` to its ground-truth embedding.

    * ``gp``: the measurement location ``l`` gives ``(l, 0)``.
    * ``hyperspheres``: class ``c`` gives ``(c / 10, 0)``; feature ``i``
      gives ``(o_t[i], 0)``.
    * ``cifar``: pixel ``(r, col)`` of a ``side x side`` image maps onto
      ``[-1, 1]^2``.
    * ``temperature``: day ``d`` of the window gives ``(d / 10, 0)``.
    """
    if not task.oracle:
        raise ValueError(f"task {task.id} ({universe_kind}) carries no ground-truth locations")

    out: Dict[VariableId, np.ndarray] = {}
    for var_id in task.variable_ids:
        try:
            raw = task.oracle[var_id.name]
        except KeyError:
            raise ValueError(
                f"task {task.id}: no ground truth for variable {var_id.name}"
            ) from None
        out[var_id] = fit_to_dim(_oracle_point(universe_kind, var_id, raw), dim)
    return out


def _oracle_point(universe_kind: str, var_id: VariableId, raw: Sequence[float]) -> List[float]:
    if universe_kind == "gp":
        return [raw[0], 0.0]
    if universe_kind == "hyperspheres":
        if var_id.role == "output":
            return [raw[0] / 10.0, 0.0]
        return [raw[0], 0.0]
    if universe_kind == "cifar":
        row, col, side = raw
        scale = max(side - 1.0, 1.0)
        return [2.0 * row / scale - 1.0, 2.0 * col / scale - 1.0]
    if universe_kind == "temperature":
        return [raw[0] / 10.0, 0.0]
    raise ValueError(f"universe {universe_kind!r} has no oracle embeddings")


def build_embedding_table(
        tasks: Sequence[Task],
        dim: int,
        mode: str,
        rng: Rng,
        init_std: float = VE_INIT_STD["variance"],
        dtype: type = np.float64
) -> VariableEmbeddingTable:
    """
    Registers every variable of ``tasks`` in ``mode``.
    """
    if mode not in VE_MODES:
        raise ValueError(f"unknown embedding mode {mode!r}; expected one of {VE_MODES}")
    table = VariableEmbeddingTable(dim, rng, init_std=init_std, dtype=dtype)
    entries = []
    for task in tasks:
        oracle: Mapping[VariableId, np.ndarray] = {}
        if mode == "oracle":
            oracle = make_oracle_ves(task.universe, task, dim)
        for var_id in task.variable_ids:
            entries.append((var_id, mode, oracle.get(var_id)))
    table.register_many(entries)
    logger.debug("registered %d %s embeddings of size %d", len(table), mode, dim)
    return table
