"""
traveling_observer.results

Per-task metric histories and the run artifacts written after training:
``results.csv`` (``task_id, epoch, split, metric_name, value``),
``metadata.json`` and ``config.txt``.
"""
from __future__ import annotations
import json
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import FormatError
from .metrics import is_better
from .rng import Rng
from .utils import to_utc_string, utc_now

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ("task_id", "epoch", "split", "metric_name", "value")
RUN_ROW = "*"
FINETUNE_PREFIX = "finetune-"


@dataclass
class TaskHistory:
    """
    Validation and test metrics of one task at every evaluated epoch.
    The reported test metric is the one stored at the epoch of best
    validation; tasks without a validation split report their last epoch.
    """
    task_id: str
    metric: str
    epochs: List[int] = field(default_factory=list)
    val: List[float] = field(default_factory=list)
    test: List[float] = field(default_factory=list)

    def record(self, epoch: int, val: Optional[float], test: float) -> None:
        self.epochs.append(epoch)
        self.val.append(math.nan if val is None else float(val))
        self.test.append(float(test))

    @property
    def has_val(self) -> bool:
        return any(not math.isnan(v) for v in self.val)

    def best_index(self) -> int:
        if not self.epochs:
            raise ValueError(f"task {self.task_id} has no recorded epochs")
        if not self.has_val:
            return len(self.epochs) - 1
        best = None
        for index, value in enumerate(self.val):
            if math.isnan(value):
                continue
            if best is None or is_better(self.metric, value, self.val[best]):
                best = index
        return best

    @property
    def best_epoch(self) -> int:
        return self.epochs[self.best_index()]

    @property
    def reported_test(self) -> float:
        return self.test[self.best_index()]

    @property
    def best_val(self) -> float:
        return self.val[self.best_index()]


@dataclass
class RunResult:
    config: RunConfig
    histories: Dict[str, TaskHistory] = field(default_factory=dict)
    finetuned: Dict[str, TaskHistory] = field(default_factory=dict)
    finetune_status: Dict[str, str] = field(default_factory=dict)
    train_loss: List[float] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)
    ve_snapshots: List[str] = field(default_factory=list)
    steps_run: int = 0
    stopped_early: bool = False
    started: datetime = field(default_factory=utc_now)
    finished: Optional[datetime] = None
    model: Any = field(default=None, repr=False, compare=False)

    def history(self, task_id: str, metric: str) -> TaskHistory:
        if task_id not in self.histories:
            self.histories[task_id] = TaskHistory(task_id, metric)
        return self.histories[task_id]

    def reported(self) -> Dict[str, float]:
        """
        Reported test metric per task, taking finetuned histories over
        joint ones where finetuning ran.
        """
        out = {task_id: h.reported_test for task_id, h in self.histories.items()}
        out.update({task_id: h.reported_test for task_id, h in self.finetuned.items()})
        return out

    def to_frame(self) -> pd.DataFrame:
        rows: List[tuple] = []
        for prefix, histories in (("", self.histories), (FINETUNE_PREFIX, self.finetuned)):
            for task_id, h in histories.items():
                for epoch, val, test in zip(h.epochs, h.val, h.test):
                    if not math.isnan(val):
                        rows.append((task_id, epoch, f"{prefix}val", h.metric, val))
                    rows.append((task_id, epoch, f"{prefix}test", h.metric, test))
        for epoch, loss in enumerate(self.train_loss, start=1):
            rows.append((RUN_ROW, epoch, "train", "loss", loss))
        return pd.DataFrame(rows, columns=list(RESULT_COLUMNS))

    def metadata(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "decisions": design_decisions(self.config),
            "started": to_utc_string(self.started),
            "finished": to_utc_string(self.finished) if self.finished else None,
            "steps_run": self.steps_run,
            "stopped_early": self.stopped_early,
            "train_loss": self.train_loss,
            "learning_rates": self.learning_rates,
            "finetune": self.finetune_status,
            "reported_test": self.reported(),
            "best_epoch": {task_id: h.best_epoch for task_id, h in self.histories.items()},
            "ve_snapshots": self.ve_snapshots,
        }

    def write(self, out_dir: str) -> Dict[str, str]:
        """
        Writes the run artifacts and returns their paths by kind.
        """
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "results": os.path.join(out_dir, "results.csv"),
            "metadata": os.path.join(out_dir, "metadata.json"),
            "config": os.path.join(out_dir, "config.txt"),
        }
        self.to_frame().to_csv(paths["results"], index=False, float_format="%.17g")
        with open(paths["metadata"], "w", encoding="utf-8") as handle:
            json.dump(_jsonable(self.metadata()), handle, indent=2, sort_keys=True)
        with open(paths["config"], "w", encoding="utf-8") as handle:
            handle.write(self.config.to_text())
        logger.info("wrote results to %s", out_dir)
        return paths


def design_decisions(config: RunConfig) -> Dict[str, Any]:
    """
    Every interpretation a run depends on, so metadata is enough to
    reproduce it.
    """
    train = config.train
    return {
        "rng": Rng.algorithm,
        "weight_init": "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), per-parameter substream",
        "skipinit_alpha": 0.0,
        "ve_init": {"variance": "N(0, variance 1e-3)", "std": "N(0, std 1e-3)"}[train.ve_init],
        "random_ve": "N(0, 1) per coordinate, frozen",
        "hypersphere_feature_oracle": "(o_i, 0)",
        "frb_order": "affine, relu, film, dropout (x2), then h + alpha * branch",
        "batch_policy": train.batch_policy,
        "batch_size": train.batch_size,
        "eval_dropout": "eval mode",
        "no_val_reporting": "last epoch",
        "rank_ties": "average",
        "degenerate_normalized_accuracy": 100.0,
        "finetune_threshold": f">= {train.finetune_min_samples}",
        "cifar_grayscale": "0.299 R + 0.587 G + 0.114 B, / 255",
        "temperature_units": "raw",
        "temperature_gaps": "windows of consecutive days only",
        "precision": train.precision,
    }


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return None if math.isnan(value) else float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def histories_from_frame(frame: pd.DataFrame, finetune: bool = False) -> Dict[str, TaskHistory]:
    prefix = FINETUNE_PREFIX if finetune else ""
    histories: Dict[str, TaskHistory] = {}
    for task_id, rows in frame[frame["task_id"] != RUN_ROW].groupby("task_id", sort=False):
        tests = rows[rows["split"] == f"{prefix}test"].sort_values("epoch", kind="stable")
        if tests.empty:
            continue
        vals = rows[rows["split"] == f"{prefix}val"].set_index("epoch")["value"]
        h = TaskHistory(str(task_id), str(tests["metric_name"].iloc[0]))
        for epoch, test in zip(tests["epoch"], tests["value"]):
            h.record(int(epoch), vals.get(epoch), float(test))
        histories[str(task_id)] = h
    return histories


def read_results(path: str) -> Dict[str, TaskHistory]:
    """
    Reads a ``results.csv`` back into histories; finetuned histories take
    the place of joint ones for the tasks that have them.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(RESULT_COLUMNS) - set(frame.columns)
    if missing:
        raise FormatError(f"missing columns {sorted(missing)}", path, 1)
    histories = histories_from_frame(frame)
    histories.update(histories_from_frame(frame, finetune=True))
    return histories


def reported_table(results: Mapping[str, Mapping[str, TaskHistory]]) -> pd.DataFrame:
    """
    Builds a methods x tasks table of reported test metrics.
    """
    return pd.DataFrame.from_dict(
        {method: {t: h.reported_test for t, h in hist.items()} for method, hist in results.items()},
        orient="index",
    )
