"""
traveling_observer.tasks

Tasks are datasets over named variables.  Variable ids are namespaced by
task id, so tasks drawn from one universe never share a variable.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .losses import LOSS_KINDS

SPLITS = ("train", "val", "test")
ROLES = ("input", "output")
METRICS = ("mse", "rmse", "bce", "accuracy")


class VariableId(NamedTuple):
    task_id: str
    name: str
    role: str

    def key(self) -> str:
        return f"{self.task_id}/{self.name}/{self.role}"


@dataclass
class Split:
    """
    Samples of one split.  ``targets`` holds output values of regression
    tasks (shape ``[S, m]``); ``labels`` holds class indices of
    classification tasks (shape ``[S]``).
    """
    inputs: np.ndarray
    targets: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim != 2:
            raise ShapeError(f"split inputs must be 2-D, got shape {self.inputs.shape}")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=np.float64)
            if self.targets.ndim != 2 or self.targets.shape[0] != self.inputs.shape[0]:
                raise ShapeError(
                    f"split targets of shape {self.targets.shape} vs inputs {self.inputs.shape}"
                )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.inputs.shape[0],):
                raise ShapeError(
                    f"split labels of shape {self.labels.shape} vs inputs {self.inputs.shape}"
                )

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


@dataclass
class Task:
    """
    A prediction problem over named input and output variables.

    Pure autoencoding tasks (images, temperature windows) list every
    variable as an input and have no outputs; their inputs are also their
    prediction targets.  Classification tasks have one output variable
    per class and store labels instead of output values.
    """
    id: str
    input_vars: List[str]
    output_vars: List[str]
    splits: Dict[str, Split]
    loss_kind: str
    metric: str
    autoencode: bool = False
    universe: str = "tabular"
    oracle: Optional[Dict[str, Tuple[float, ...]]] = None
    info: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"task {self.id}: unknown loss kind {self.loss_kind!r}")
        if self.metric not in METRICS:
            raise ValueError(f"task {self.id}: unknown metric {self.metric!r}")
        if not self.input_vars:
            raise ValueError(f"task {self.id}: a task needs at least one input variable")
        names = list(self.input_vars) + list(self.output_vars)
        if len(set(names)) != len(names):
            raise ValueError(f"task {self.id}: variable names must be unique")
        for name, split in self.splits.items():
            if split.inputs.shape[1] != self.n_inputs:
                raise ShapeError(
                    f"task {self.id}/{name}: {split.inputs.shape[1]} input columns, "
                    f"expected {self.n_inputs}"
                )
            if self.is_classification:
                if split.labels is None:
                    raise ValueError(f"task {self.id}/{name}: classification split needs labels")
            elif self.n_outputs and (split.targets is None
                                     or split.targets.shape[1] != self.n_outputs):
                raise ShapeError(f"task {self.id}/{name}: expected {self.n_outputs} output columns")

    def __repr__(self) -> str:
        sizes = ", ".join(f"{k}={len(v)}" for k, v in self.splits.items())
        return f"<Task({self.id}, n={self.n_inputs}, m={self.n_outputs}, {sizes})>"

    @property
    def n_inputs(self) -> int:
        return len(self.input_vars)

    @property
    def n_outputs(self) -> int:
        return len(self.output_vars)

    @property
    def is_classification(self) -> bool:
        return self.loss_kind == "squared_hinge"

    @property
    def input_ids(self) -> List[VariableId]:
        return [VariableId(self.id, name, "input") for name in self.input_vars]

    @property
    def output_ids(self) -> List[VariableId]:
        return [VariableId(self.id, name, "output") for name in self.output_vars]

    @property
    def variable_ids(self) -> List[VariableId]:
        return self.input_ids + self.output_ids

    @property
    def prediction_ids(self) -> List[VariableId]:
        """
        Every variable the task can be asked to predict: inputs and
        outputs for autoencoding tasks, outputs otherwise.
        """
        if self.autoencode:
            return self.variable_ids
        return self.output_ids

    @property
    def train_size(self) -> int:
        return len(self.splits["train"]) if "train" in self.splits else 0

    def has_split(self, name: str) -> bool:
        return name in self.splits and len(self.splits[name]) > 0

    def values(self, split: str, rows: np.ndarray) -> np.ndarray:
        """
        Returns inputs followed by output values (regression) for the
        given rows, i.e. one column per entry of :attr:`variable_ids`.
        """
        data = self.splits[split]
        columns = [data.inputs[rows]]
        if data.targets is not None and not self.is_classification:
            columns.append(data.targets[rows])
        return np.concatenate(columns, axis=1)


def check_disjoint(tasks: Sequence[Task]) -> None:
    """
    Raises if two tasks share an id, which would make their variable ids
    collide.
    """
    seen = set()
    for task in tasks:
        if task.id in seen:
            raise ValueError(f"duplicate task id {task.id!r}")
        seen.add(task.id)
