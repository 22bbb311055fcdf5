"""
traveling_observer.metrics

Per-split evaluation metrics and the cross-task aggregates used to compare
methods over a benchmark.
"""
from __future__ import annotations
from typing import Dict, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist
from scipy.stats import pearsonr, rankdata, spearmanr

from .embeddings import make_oracle_ves
from .errors import ShapeError
from .tasks import Task, VariableId

#: Metrics where a smaller value is better.
LOWER_IS_BETTER = frozenset({"mse", "rmse", "bce", "loss"})
AGGREGATES = ("mean_acc", "normalized_acc", "mean_rank", "best_pct", "win_pct")


def higher_is_better(metric: str) -> bool:
    return metric not in LOWER_IS_BETTER


def is_better(metric: str, candidate: float, incumbent: float) -> bool:
    if higher_is_better(metric):
        return candidate > incumbent
    return candidate < incumbent


def mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    if predictions.shape != targets.shape:
        raise ShapeError(f"predictions {predictions.shape} vs targets {targets.shape}")
    return float(np.mean((predictions - targets) ** 2))


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    return float(np.sqrt(mse(predictions, targets)))


def mean_bce(logits: np.ndarray, targets: np.ndarray) -> float:
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets.shape}")
    return float(np.mean(np.logaddexp(0.0, logits) - targets * logits))


def accuracy(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Percentage of samples whose highest-scoring class is the label.
    """
    if scores.ndim != 2 or scores.shape[0] != np.shape(labels)[0]:
        raise ShapeError(f"scores {scores.shape} vs labels {np.shape(labels)}")
    return float(np.mean(np.argmax(scores, axis=1) == np.asarray(labels)) * 100.0)


def _as_table(table: Union[pd.DataFrame, Mapping[str, Sequence[float]]]) -> pd.DataFrame:
    if not isinstance(table, pd.DataFrame):
        table = pd.DataFrame.from_dict(dict(table), orient="index")
    return table.astype(np.float64)


def metric_suite(
        table: Union[pd.DataFrame, Mapping[str, Sequence[float]]],
        higher_better: bool = True
) -> pd.DataFrame:
    """
    Aggregates a methods x tasks table of per-task scores.

    * ``mean_acc``: mean score over tasks.
    * ``normalized_acc``: per task ``(a - min) / (max - min) * 100``,
      averaged over tasks.  A task where every method scores the same
      gives every method 100.
    * ``mean_rank``: per task rank with 0 for the best; ties share the
      mean of the ranks they occupy.
    * ``best_pct``: share of tasks where the method attains the best
      score, ties included.
    * ``win_pct``: share of tasks where the method is strictly better than
      every other method.

    :param table: Rows are methods, columns are tasks.
    :returns: One row per method, one column per aggregate.
    """
    frame = _as_table(table)
    if frame.empty:
        raise ValueError("empty score table")
    if frame.isna().any().any():
        method, task = next(
            (m, t) for m in frame.index for t in frame.columns if pd.isna(frame.at[m, t])
        )
        raise ValueError(f"missing score for method {method!r} on task {task!r}")

    scores = frame.to_numpy()
    oriented = scores if higher_better else -scores
    best = oriented.max(axis=0)
    worst = oriented.min(axis=0)
    spread = best - worst
    degenerate = spread == 0
    normalized = np.where(
        degenerate, 100.0, (oriented - worst) / np.where(degenerate, 1.0, spread) * 100.0
    )
    ranks = rankdata(-oriented, method="average", axis=0) - 1.0
    at_best = oriented == best
    winners = at_best & (at_best.sum(axis=0) == 1)

    return pd.DataFrame(
        {
            "mean_acc": scores.mean(axis=1),
            "normalized_acc": normalized.mean(axis=1),
            "mean_rank": ranks.mean(axis=1),
            "best_pct": at_best.mean(axis=1) * 100.0,
            "win_pct": winners.mean(axis=1) * 100.0,
        },
        index=frame.index,
    )


def suite_to_dict(suite: pd.DataFrame) -> Dict[str, Dict[str, float]]:
    return {
        str(method): {name: float(row[name]) for name in AGGREGATES}
        for method, row in suite.iterrows()
    }


def angular_order_correlation(points: np.ndarray, order: Sequence[float]) -> float:
    """
    Spearman ``|rho|`` between ``order`` and the angle of each point
    around the centroid, in the plane of the first two coordinates.  The
    angle origin is placed at every point in turn and the strongest
    correlation is kept, so a closed loop scores the same from any start.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] < 2:
        raise ShapeError(f"need points with at least two coordinates, got shape {points.shape}")
    if points.shape[0] != len(order):
        raise ShapeError(f"{points.shape[0]} points vs {len(order)} order values")
    if points.shape[0] < 3:
        raise ValueError("angular order needs at least three points")
    centred = points[:, :2] - points[:, :2].mean(axis=0)
    angles = np.arctan2(centred[:, 1], centred[:, 0])
    best = 0.0
    for start in angles:
        rho = spearmanr(order, np.mod(angles - start, 2.0 * np.pi))[0]
        if np.isfinite(rho):
            best = max(best, abs(float(rho)))
    return best


def distance_correlation(points: np.ndarray, truth: np.ndarray) -> float:
    """
    Pearson correlation between the pairwise distances of ``points`` and
    those of ``truth``; ``nan`` when either set of distances is constant.
    """
    points = np.asarray(points, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if points.shape[0] != truth.shape[0]:
        raise ShapeError(f"{points.shape[0]} points vs {truth.shape[0]} ground-truth points")
    if points.shape[0] < 3:
        raise ValueError("distance correlation needs at least three points")
    learned, actual = pdist(points), pdist(truth)
    if np.ptp(learned) == 0 or np.ptp(actual) == 0:
        return float("nan")
    return float(pearsonr(learned, actual)[0])


def embedding_recovery(frame: pd.DataFrame, task: Task) -> Dict[str, float]:
    """
    Compares the embeddings of ``task`` in a VE frame (see
    :meth:`~traveling_observer.embeddings.VariableEmbeddingTable.to_frame`)
    with the task's ground truth.

    * ``distance_pearson``: :func:`distance_correlation` against the
      oracle embeddings.
    * ``angular_spearman``: for temperature tasks, the
      :func:`angular_order_correlation` of the embeddings with the day
      lag.

    Tasks with fewer than three variables give an empty result.
    """
    rows = frame[frame["task_id"] == task.id]
    if rows.empty:
        raise ValueError(f"no embeddings for task {task.id}")
    if len(rows) < 3:
        return {}
    columns = [c for c in frame.columns if c[:1] == "c" and c[1:].isdigit()]
    coords = rows[columns].to_numpy(dtype=np.float64)
    oracle = make_oracle_ves(task.universe, task)
    truth = np.array([
        oracle[VariableId(task.id, name, role)]
        for name, role in zip(rows["variable_name"], rows["role"])
    ])
    out = {"distance_pearson": distance_correlation(coords, truth)}
    if task.universe == "temperature":
        lags = [task.oracle[name][0] for name in rows["variable_name"]]
        out["angular_spearman"] = angular_order_correlation(coords, lags)
    return out
