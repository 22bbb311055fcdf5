"""
traveling_observer.training

The training loop shared by every mode, evaluation, per-task finetuning and
the small problem used to check gradients end to end.

A step samples ``tasks_per_step`` tasks, draws a batch (and, for
autoencoding tasks, an observed subset) for each from substreams keyed by
``(task id, step)``, sums the gradients of the per-task losses and takes
one Adam step per touched model.
"""
from __future__ import annotations
import copy
import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, TrainConfig
from .deep_residual import DrModel
from .embeddings import VE_INIT_STD, VariableEmbeddingTable, build_embedding_table
from .errors import FormatError, UnknownTaskError
from .layers import EVAL, ForwardContext
from .losses import compute_loss, mse_loss
from .metrics import accuracy, higher_is_better, mean_bce, mse, rmse
from .optim import AdamState, adam_step
from .params import DTYPES, ParamTensor, count_parameters
from .results import RunResult, TaskHistory
from .rng import Rng
from .schedules import DECREASE, PlateauSchedule, simple_moving_average, STOP
from .subsets import sample_variable_subset
from .tasks import Task, VariableId, check_disjoint
from .tom import TomModel
from .utils import utc_now

logger = logging.getLogger(__name__)

SHARED = "shared"
MAX_POLICY_BATCH = 200

Model = Union[TomModel, DrModel]


@dataclass
class BatchPlan:
    """
    What one forward pass sees: sample rows of a split, the observed
    variables and the variables to predict.  Variable indices point into
    :attr:`Task.variable_ids`.
    """
    task_id: str
    split: str
    rows: np.ndarray
    observed: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.rows.size)


def batch_size_for(task: Task, config: TrainConfig) -> Tuple[int, bool]:
    """
    Returns ``(batch size, with replacement)`` for ``task``.  A fixed
    ``batch_size`` wins; otherwise ``min`` draws ``min(200, n)`` samples
    without replacement and ``max`` draws ``max(200, n)`` with
    replacement.
    """
    n = task.train_size
    if n == 0:
        raise ValueError(f"task {task.id} has no training samples")
    if config.batch_size is not None:
        return config.batch_size, config.batch_size > n
    if config.batch_policy == "max":
        return max(MAX_POLICY_BATCH, n), True
    return min(MAX_POLICY_BATCH, n), False


def batch_for(task: Task, generator: np.random.Generator, config: TrainConfig) -> np.ndarray:
    """
    Draws the training rows of one step.
    """
    size, replace = batch_size_for(task, config)
    return generator.choice(task.train_size, size=size, replace=replace)


def _prediction_columns(task: Task) -> np.ndarray:
    if task.autoencode:
        return np.arange(task.n_inputs + task.n_outputs)
    return np.arange(task.n_inputs, task.n_inputs + task.n_outputs)


def training_plan(task: Task, generator: np.random.Generator, config: TrainConfig) -> BatchPlan:
    """
    Autoencoding tasks observe a random subset of their inputs and predict
    every variable; other tasks observe all inputs and predict outputs.
    """
    rows = batch_for(task, generator, config)
    if task.autoencode:
        observed = sample_variable_subset(task.n_inputs, generator)
    else:
        observed = np.arange(task.n_inputs)
    return BatchPlan(task.id, "train", rows, observed, _prediction_columns(task))


def eval_plans(task: Task, split: str, rng: Rng, batch_size: int) -> List[BatchPlan]:
    """
    Chunks a split for evaluation.  Tasks with outputs observe every input
    and predict the outputs.  Pure autoencoding tasks observe a subset
    drawn from the ``eval`` substream of each chunk, so every evaluation
    of a split sees the same subsets.
    """
    n = len(task.splits[split])
    plans = []
    for chunk, start in enumerate(range(0, n, batch_size)):
        rows = np.arange(start, min(start + batch_size, n))
        if task.n_outputs:
            observed = np.arange(task.n_inputs)
            targets = np.arange(task.n_inputs, task.n_inputs + task.n_outputs)
        else:
            generator = rng.derive("eval", task.id, f"{split}:{chunk}")
            observed = sample_variable_subset(task.n_inputs, generator)
            targets = np.arange(task.n_inputs)
        plans.append(BatchPlan(task.id, split, rows, observed, targets))
    return plans


def plan_inputs(task: Task, plan: BatchPlan) -> np.ndarray:
    return task.splits[plan.split].inputs[plan.rows][:, plan.observed]


def plan_targets(task: Task, plan: BatchPlan) -> np.ndarray:
    """
    Class labels for classification tasks, otherwise the values of the
    target variables.
    """
    if task.is_classification:
        return task.splits[plan.split].labels[plan.rows]
    return task.values(plan.split, plan.rows)[:, plan.targets]


class ModelBank:
    """
    The models and optimizers of one training mode.

    * ``TOM``: one model shared by every task.
    * ``TOM-STL``: one model per task.
    * ``DR-MTL``: one trunk shared by every task with per-task heads.
    * ``DR-STL``: one deep residual model per task.
    """
    def __init__(
            self,
            mode: str,
            models: Dict[str, Model],
            learning_rate: float = 1e-3,
            weight_decay: float = 0.0
    ) -> None:
        self.mode = mode
        self.models = models
        self.optimizers = {
            key: AdamState(learning_rate=learning_rate, weight_decay=weight_decay)
            for key in models
        }
        self._dr_cache: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __repr__(self) -> str:
        return f"<ModelBank({self.mode}, {len(self.models)} models)>"

    @classmethod
    def build(cls, config: TrainConfig, tasks: Sequence[Task], rng: Rng) -> "ModelBank":
        check_disjoint(tasks)
        dtype = DTYPES[config.precision]
        models: Dict[str, Model] = {}
        if config.mode in ("TOM", "DR-MTL"):
            models[SHARED] = _make_model(config, tasks, rng, dtype)
        else:
            for task in tasks:
                models[task.id] = _make_model(config, [task], rng.scoped(task.id), dtype)
        bank = cls(config.mode, models, config.learning_rate, config.weight_decay)
        logger.info(
            "built %s bank: %d model(s), %d parameters", config.mode, len(models),
            bank.parameter_count()
        )
        return bank

    @property
    def shared(self) -> bool:
        return SHARED in self.models

    @property
    def uses_embeddings(self) -> bool:
        return self.mode.startswith("TOM")

    def key(self, task_id: str) -> str:
        if self.shared:
            return SHARED
        if task_id not in self.models:
            raise UnknownTaskError(f"no model for task {task_id!r}")
        return task_id

    def model(self, task_id: str) -> Model:
        return self.models[self.key(task_id)]

    def parameters(self, key: str) -> List[ParamTensor]:
        return self.models[key].parameters()

    def parameter_count(self) -> int:
        return sum(count_parameters(self.parameters(key)) for key in self.models)

    def zero_grads(self) -> None:
        for model in self.models.values():
            model.zero_grads()

    def set_learning_rate(self, learning_rate: float) -> None:
        for state in self.optimizers.values():
            state.learning_rate = learning_rate

    def step(self, keys: Sequence[str]) -> None:
        for key in keys:
            adam_step(self.optimizers[key], self.parameters(key))

    def predict(self, task: Task, plan: BatchPlan, ctx: ForwardContext = EVAL) -> np.ndarray:
        """
        Returns predictions of shape ``[len(plan), len(plan.targets)]``.
        """
        model = self.model(task.id)
        values = plan_inputs(task, plan)
        if isinstance(model, TomModel):
            ids = task.variable_ids
            return model.forward(
                values, [ids[i] for i in plan.observed], [ids[i] for i in plan.targets], ctx
            )
        x = np.zeros((len(plan), task.n_inputs), dtype=model.dtype)
        x[:, plan.observed] = values
        out = model.forward(task.id, x, ctx)
        columns = plan.targets - (0 if task.autoencode else task.n_inputs)
        self._dr_cache = (columns, np.zeros_like(out))
        return out[:, columns]

    def backward(self, task: Task, grad: np.ndarray) -> None:
        model = self.model(task.id)
        if isinstance(model, TomModel):
            model.backward(grad)
            return
        if self._dr_cache is None:
            raise RuntimeError("ModelBank.backward called without a preceding predict")
        columns, full = self._dr_cache
        self._dr_cache = None
        full[:, columns] = grad
        model.backward(full)

    def loss_and_backward(self, task: Task, plan: BatchPlan, ctx: ForwardContext) -> float:
        predictions = self.predict(task, plan, ctx)
        loss, grad = compute_loss(task.loss_kind, predictions, plan_targets(task, plan))
        self.backward(task, grad)
        return loss

    def embedding_tables(self) -> Dict[str, VariableEmbeddingTable]:
        return {
            key: model.ve for key, model in self.models.items() if isinstance(model, TomModel)
        }

    def ve_frame(self) -> pd.DataFrame:
        frames = [table.to_frame() for table in self.embedding_tables().values()]
        if not frames:
            raise ValueError(f"mode {self.mode} has no variable embeddings")
        return pd.concat(frames, ignore_index=True)

    def named_arrays(self) -> Dict[str, np.ndarray]:
        return {
            f"{key}/{name}": values
            for key, model in self.models.items()
            for name, values in model.named_arrays().items()
        }

    def load_arrays(self, arrays: Mapping[str, np.ndarray], path: Optional[str] = None) -> None:
        """
        Copies values into every parameter by name.
        """
        targets = {
            f"{key}/{p.name}": p
            for key, model in self.models.items()
            for p in _stored_parameters(model)
        }
        missing = sorted(set(targets) - set(arrays))
        if missing:
            raise FormatError(f"checkpoint lacks parameter {missing[0]}", path)
        for name, param in targets.items():
            param.assign(arrays[name])

    def isolate(self, task_id: str, learning_rate: float) -> "ModelBank":
        """
        Copies the model serving ``task_id`` into a single-task bank with
        fresh optimizer state.
        """
        model = copy.deepcopy(self.model(task_id))
        return ModelBank(self.mode, {task_id: model}, learning_rate,
                         self.optimizers[self.key(task_id)].weight_decay)


def _stored_parameters(model: Model) -> List[ParamTensor]:
    if isinstance(model, TomModel):
        return model.network_parameters() + [model.ve.table]
    return model.parameters()


def _make_model(config: TrainConfig, tasks: Sequence[Task], rng: Rng, dtype: type) -> Model:
    if config.mode.startswith("TOM"):
        table = build_embedding_table(
            tasks, config.ve_dim, config.ve_mode, rng, VE_INIT_STD[config.ve_init], dtype
        )
        return TomModel(table, rng, config.hidden_size, config.latent_size, config.num_blocks,
                        config.dropout_rate, dtype)
    model = DrModel(rng, config.hidden_size, config.num_blocks, config.dropout_rate, dtype)
    for task in tasks:
        model.register_task(task.id, task.n_inputs, len(task.prediction_ids))
    return model


def evaluate(
        bank: ModelBank,
        task: Task,
        split: str,
        rng: Optional[Rng] = None,
        batch_size: int = 256
) -> float:
    """
    Computes the task's metric on ``split`` in eval mode: MSE or RMSE,
    mean BCE, or accuracy in percent.
    """
    if not task.has_split(split):
        raise ValueError(f"task {task.id} has no samples in split {split!r}")
    rng = rng or Rng(0)
    predictions, targets = [], []
    for plan in eval_plans(task, split, rng, batch_size):
        predictions.append(bank.predict(task, plan, EVAL))
        targets.append(plan_targets(task, plan))
    pred = np.concatenate(predictions).astype(np.float64)
    true = np.concatenate(targets)
    if task.metric == "accuracy":
        return accuracy(pred, true)
    if task.metric == "bce":
        return mean_bce(pred, true)
    if task.metric == "rmse":
        return rmse(pred, true)
    return mse(pred, true)


def _sample_tasks(rng: Rng, n_tasks: int, per_step: int, step: int) -> np.ndarray:
    generator = rng.derive("tasks", 0, step)
    return np.sort(generator.choice(n_tasks, size=min(per_step, n_tasks), replace=False))


def train_step(
        bank: ModelBank,
        tasks: Sequence[Task],
        config: TrainConfig,
        rng: Rng,
        step: int,
        label: str = ""
) -> float:
    """
    Runs one optimization step and returns the mean loss of the sampled
    tasks.  Tasks are processed in index order so gradient sums are
    reproducible.
    """
    bank.zero_grads()
    losses = []
    keys: List[str] = []
    for index in _sample_tasks(rng, len(tasks), config.tasks_per_step, step):
        task = tasks[index]
        plan = training_plan(task, rng.derive(f"{label}batch", task.id, step), config)
        ctx = ForwardContext(training=True, generator=rng.derive(f"{label}dropout", task.id, step))
        losses.append(bank.loss_and_backward(task, plan, ctx))
        key = bank.key(task.id)
        if key not in keys:
            keys.append(key)
    bank.step(keys)
    return float(np.mean(losses))


def _evaluate_all(
        bank: ModelBank,
        tasks: Sequence[Task],
        result: RunResult,
        rng: Rng,
        epoch: int,
        batch_size: int
) -> List[float]:
    vals = []
    for task in tasks:
        val = evaluate(bank, task, "val", rng, batch_size) if task.has_split("val") else None
        test = evaluate(bank, task, "test", rng, batch_size)
        result.history(task.id, task.metric).record(epoch, val, test)
        logger.debug("epoch %d %s: val=%s test=%.6g", epoch, task.id, val, test)
        if val is not None:
            vals.append(val)
    return vals


def snapshot_embeddings(bank: ModelBank, out_dir: str, epoch: int) -> str:
    """
    Writes ``ves/epoch_XXXXXX.csv`` under ``out_dir``.
    """
    directory = os.path.join(out_dir, "ves")
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"epoch_{epoch:06d}.csv")
    bank.ve_frame().to_csv(path, index=False, float_format="%.17g")
    return path


def train(
        config: RunConfig,
        tasks: Sequence[Task],
        out_dir: Optional[str] = None,
        bank: Optional[ModelBank] = None
) -> RunResult:
    """
    Trains a bank of ``config.train.mode`` on ``tasks``.

    Every ``epoch_steps`` steps all tasks are evaluated on their
    validation and test splits.  With ``lr_schedule = plateau`` the mean
    validation metric drives :class:`PlateauSchedule`.  When ``out_dir``
    is given, embedding snapshots are written there.  The trained bank
    is available as ``result.model``.
    """
    if not tasks:
        raise ValueError("cannot train on an empty universe")
    cfg = config.train
    rng = Rng(cfg.seed)
    bank = bank or ModelBank.build(cfg, tasks, rng)
    result = RunResult(config=config, model=bank)

    if cfg.tasks_per_step > len(tasks):
        logger.warning("tasks_per_step %d exceeds the %d tasks; sampling all of them",
                       cfg.tasks_per_step, len(tasks))
    schedule = None
    if cfg.lr_schedule == "plateau":
        schedule = PlateauSchedule(cfg.learning_rate, cfg.plateau_patience, 0.5,
                                   cfg.max_lr_decreases, higher_is_better(tasks[0].metric))
    snapshots = out_dir is not None and bank.uses_embeddings

    step = 0
    epoch = 0
    snapshot_epoch = -1
    while step < cfg.steps_total:
        epoch += 1
        losses = []
        for _ in range(min(cfg.epoch_steps, cfg.steps_total - step)):
            losses.append(train_step(bank, tasks, cfg, rng, step))
            step += 1
        result.train_loss.append(float(np.mean(losses)))
        result.learning_rates.append(bank.optimizers[next(iter(bank.optimizers))].learning_rate)
        vals = _evaluate_all(bank, tasks, result, rng, epoch, cfg.eval_batch_size)
        mean_val = float(np.mean(vals)) if vals else math.nan
        logger.info("epoch %d (step %d): train loss %.6g, mean val %.6g, lr %g", epoch, step,
                    result.train_loss[-1], mean_val, result.learning_rates[-1])

        if snapshots and cfg.ve_snapshot_every and epoch % cfg.ve_snapshot_every == 0:
            result.ve_snapshots.append(snapshot_embeddings(bank, out_dir, epoch))
            snapshot_epoch = epoch
        if schedule is not None and vals:
            action = schedule.step(mean_val)
            if action == DECREASE:
                bank.set_learning_rate(schedule.learning_rate)
            elif action == STOP:
                result.stopped_early = True
                break

    result.steps_run = step
    if snapshots and snapshot_epoch != epoch:
        result.ve_snapshots.append(snapshot_embeddings(bank, out_dir, epoch))
    if cfg.finetune:
        for task in tasks:
            history = finetune(bank, task, cfg, rng, result)
            if history is not None:
                result.finetuned[task.id] = history
    result.finished = utc_now()
    return result


def finetune(
        bank: ModelBank,
        task: Task,
        config: TrainConfig,
        rng: Rng,
        result: Optional[RunResult] = None
) -> Optional[TaskHistory]:
    """
    Continues training a copy of the task's model on that task alone.
    Tasks with fewer than ``finetune_min_samples`` training samples are
    skipped.  The plateau rule watches the validation metric smoothed by
    a trailing moving average.
    """
    if task.train_size < config.finetune_min_samples or not task.has_split("val"):
        status = f"skipped: {task.train_size} train samples"
        if not task.has_split("val"):
            status = "skipped: no validation split"
        logger.info("finetune %s %s", task.id, status)
        if result is not None:
            result.finetune_status[task.id] = status
        return None

    tuned = bank.isolate(task.id, config.finetune_learning_rate)
    schedule = PlateauSchedule(config.finetune_learning_rate, config.finetune_patience, 0.5,
                               config.max_lr_decreases, higher_is_better(task.metric))
    solo = dataclasses.replace(config, tasks_per_step=1)
    history = TaskHistory(task.id, task.metric)
    step = 0
    for epoch in range(1, config.finetune_max_epochs + 1):
        for _ in range(config.epoch_steps):
            train_step(tuned, [task], solo, rng, step, label="finetune-")
            step += 1
        val = evaluate(tuned, task, "val", rng, config.eval_batch_size)
        test = evaluate(tuned, task, "test", rng, config.eval_batch_size)
        history.record(epoch, val, test)
        smoothed = simple_moving_average(history.val, config.finetune_smoothing)[-1]
        action = schedule.step(float(smoothed))
        if action == DECREASE:
            tuned.set_learning_rate(schedule.learning_rate)
        elif action == STOP:
            break

    status = f"finetuned: {len(history.epochs)} epochs"
    logger.info("finetune %s %s, best epoch %d", task.id, status, history.best_epoch)
    if result is not None:
        result.finetune_status[task.id] = status
    return history


def task_skeleton(task: Task) -> Dict[str, Any]:
    return {
        "id": task.id,
        "inputs": task.input_vars,
        "outputs": task.output_vars,
        "loss_kind": task.loss_kind,
        "metric": task.metric,
        "autoencode": task.autoencode,
        "universe": task.universe,
        "oracle": {k: list(v) for k, v in (task.oracle or {}).items()},
    }


def task_from_skeleton(data: Mapping[str, Any]) -> Task:
    return Task(
        id=data["id"],
        input_vars=list(data["inputs"]),
        output_vars=list(data["outputs"]),
        splits={},
        loss_kind=data["loss_kind"],
        metric=data["metric"],
        autoencode=bool(data["autoencode"]),
        universe=data["universe"],
        oracle={k: tuple(v) for k, v in data["oracle"].items()} or None,
    )


def save_bank(path: str, bank: ModelBank, config: RunConfig, tasks: Sequence[Task]) -> None:
    """
    Writes every parameter of the bank plus what is needed to rebuild it:
    the resolved config, the task variables and the embedding manifest.
    """
    meta = {
        "config": config.to_dict(),
        "tasks": [task_skeleton(task) for task in tasks],
        "ve_manifest": {key: table.manifest() for key, table in bank.embedding_tables().items()},
    }
    save_checkpoint(path, bank.named_arrays(), meta)
    logger.info("saved checkpoint %s", path)


def load_bank(path: str) -> Tuple[ModelBank, RunConfig, List[Task]]:
    """
    Rebuilds the bank saved by :func:`save_bank` and loads its parameters.
    The returned tasks carry variables but no data.
    """
    arrays, meta = load_checkpoint(path)
    try:
        config = RunConfig()
        for values in meta["config"].values():
            for key, value in values.items():
                config.set(key, value, path)
        config.train.validate()
        tasks = [task_from_skeleton(data) for data in meta["tasks"]]
    except KeyError as error:
        raise FormatError(f"checkpoint metadata lacks {error}", path) from None
    bank = ModelBank.build(config.train, tasks, Rng(config.train.seed))
    for key, table in bank.embedding_tables().items():
        if table.manifest() != meta.get("ve_manifest", {}).get(key):
            raise FormatError(f"embedding rows of model {key!r} do not match the manifest", path)
    bank.load_arrays(arrays, path)
    return bank, config, tasks


@dataclass
class MicroProblem:
    """
    A tiny fixed TOM problem for end-to-end gradient checks.
    """
    model: TomModel
    values: np.ndarray
    observed: List[VariableId]
    targets: List[VariableId]
    target_values: np.ndarray
    redraws: int = 0
    params: List[ParamTensor] = field(default_factory=list)

    def loss(self) -> float:
        predictions = self.model.forward(self.values, self.observed, self.targets, EVAL)
        loss, grad = mse_loss(predictions, self.target_values)
        self.model.backward(grad)
        return loss

    @property
    def closure(self) -> Callable[[], float]:
        return self.loss


def build_micro_problem(
        seed: int = 0,
        ve_dim: int = 2,
        hidden: int = 8,
        latent: int = 8,
        num_blocks: int = 2,
        n_observed: int = 3,
        n_targets: int = 2,
        batch: int = 4,
        min_margin: float = 1e-4,
        max_redraws: int = 1000
) -> MicroProblem:
    """
    Builds the micro configuration with learned embeddings and non-zero
    SkipInit scalars, redrawing the data until every ReLU pre-activation
    is at least ``min_margin`` away from zero.
    """
    rng = Rng(seed)
    observed = [VariableId("micro", f"x{i}", "input") for i in range(n_observed)]
    targets = [VariableId("micro", f"y{j}", "output") for j in range(n_targets)]
    table = VariableEmbeddingTable(ve_dim, rng)
    table.register_many([(var_id, "learned", None) for var_id in observed + targets])
    table.table.values[...] = rng.derive("micro", "ve").standard_normal(table.table.shape)
    model = TomModel(table, rng, hidden, latent, num_blocks, 0.0, np.float64)

    alphas = rng.derive("micro", "alpha").uniform(0.3, 0.8, size=3 * num_blocks)
    blocks = model.encoder.blocks + model.core.blocks + model.decoder.blocks
    for block, alpha in zip(blocks, alphas):
        block.alpha.values[0] = alpha

    for attempt in range(max_redraws):
        generator = rng.derive("micro", "data", attempt)
        values = generator.standard_normal((batch, n_observed))
        target_values = generator.standard_normal((batch, n_targets))
        model.forward(values, observed, targets, EVAL)
        margin = model.relu_margin()
        model.backward(np.zeros((batch, n_targets)))
        if margin > min_margin:
            model.zero_grads()
            return MicroProblem(model, values, observed, targets, target_values, attempt,
                                model.parameters())
    raise RuntimeError(f"no data draw kept ReLU margins above {min_margin}")
