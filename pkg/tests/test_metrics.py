"""
tests.test_metrics
"""
import math

import numpy as np
import pandas as pd
import pytest
import traveling_observer as tom
from traveling_observer.metrics import (
    AGGREGATES,
    angular_order_correlation,
    distance_correlation,
    accuracy,
    higher_is_better,
    is_better,
    mean_bce,
    rmse,
    suite_to_dict,
)


def test_split_metrics() -> None:
    """
    Test accuracy in percent, RMSE and BCE on logits.
    """
    scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]])

    assert accuracy(scores, np.array([0, 1, 1, 1])) == 75.0
    assert rmse(np.array([[3.0]]), np.array([[0.0]])) == 3.0
    assert math.isclose(mean_bce(np.zeros(4), np.full(4, 0.3)), math.log(2.0))
    with pytest.raises(tom.ShapeError):
        accuracy(scores, np.array([0, 1]))


def test_direction() -> None:
    """
    Test which metrics improve upwards.
    """
    assert higher_is_better("accuracy")
    assert not higher_is_better("mse")
    assert is_better("rmse", 1.0, 2.0)
    assert not is_better("accuracy", 1.0, 2.0)


def test_two_by_two() -> None:
    """
    Test the aggregates when each method wins one task.
    """
    suite = tom.metric_suite({"a": [1.0, 0.0], "b": [0.0, 1.0]})

    for method in ("a", "b"):
        assert suite.at[method, "mean_acc"] == 0.5
        assert suite.at[method, "normalized_acc"] == 50.0
        assert suite.at[method, "mean_rank"] == 0.5
        assert suite.at[method, "best_pct"] == 50.0
        assert suite.at[method, "win_pct"] == 50.0


def test_ties() -> None:
    """
    Test that ties share ranks, count as best but not as wins, and that
    a degenerate task gives every method 100.
    """
    table = pd.DataFrame({"t1": [0.7, 0.7], "t2": [0.9, 0.1]}, index=["a", "b"])
    suite = tom.metric_suite(table)

    assert suite.at["a", "normalized_acc"] == 100.0
    assert suite.at["b", "normalized_acc"] == 50.0
    assert suite.at["a", "mean_rank"] == 0.25
    assert suite.at["b", "mean_rank"] == 0.75
    assert suite.at["a", "best_pct"] == 100.0
    assert suite.at["b", "best_pct"] == 50.0
    assert suite.at["a", "win_pct"] == 50.0
    assert suite.at["b", "win_pct"] == 0.0


def test_lower_is_better() -> None:
    """
    Test ranking errors, where the smallest value wins.
    """
    suite = tom.metric_suite({"a": [0.1, 0.2], "b": [0.3, 0.4], "c": [0.2, 0.3]},
                             higher_better=False)

    assert list(suite["mean_rank"]) == [0.0, 2.0, 1.0]
    assert suite.at["a", "normalized_acc"] == 100.0
    assert suite.at["b", "normalized_acc"] == 0.0
    assert suite.at["c", "win_pct"] == 0.0


def test_missing_scores() -> None:
    """
    Test that a missing score or an empty table is an error.
    """
    table = pd.DataFrame({"t1": [0.5, np.nan]}, index=["a", "b"])
    with pytest.raises(ValueError, match="'b'"):
        tom.metric_suite(table)
    with pytest.raises(ValueError):
        tom.metric_suite(pd.DataFrame())


def test_suite_to_dict() -> None:
    """
    Test the JSON form of the aggregates.
    """
    report = suite_to_dict(tom.metric_suite({"a": [1.0], "b": [0.0]}))

    assert report["a"]["win_pct"] == 100.0
    assert set(report["b"]) == {"mean_acc", "normalized_acc", "mean_rank", "best_pct", "win_pct"}


def brute_force_suite(scores: np.ndarray) -> np.ndarray:
    """
    Aggregates of a methods x tasks table, computed one cell at a time.
    """
    methods, tasks = scores.shape
    out = np.zeros((methods, 5))
    for m in range(methods):
        normalized, ranks, best, wins = [], [], 0, 0
        for t in range(tasks):
            column = list(scores[:, t])
            top, bottom = max(column), min(column)
            spread = top - bottom
            normalized.append(100.0 if spread == 0 else (column[m] - bottom) / spread * 100.0)
            better = sum(1 for a in column if a > column[m])
            equal = sum(1 for a in column if a == column[m])
            ranks.append(better + (equal - 1) / 2.0)
            if column[m] == top:
                best += 1
                if column.count(top) == 1:
                    wins += 1
        out[m] = [np.mean(scores[m]), np.mean(normalized), np.mean(ranks),
                  best / tasks * 100.0, wins / tasks * 100.0]
    return out


def test_suite_matches_brute_force() -> None:
    """
    Test the vectorized aggregates against a cell by cell computation on
    random tables with ties.
    """
    gen = np.random.default_rng(11)
    for _ in range(100):
        scores = gen.integers(0, 6, size=(5, 20)) * 20.0
        methods = [f"m{i}" for i in range(5)]
        suite = tom.metric_suite(pd.DataFrame(scores, index=methods))

        assert np.allclose(suite.loc[methods, list(AGGREGATES)].to_numpy(),
                           brute_force_suite(scores))


def circle(count: int, start: float = 0.0) -> np.ndarray:
    angles = start + np.arange(count) * 2.0 * np.pi / count
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def test_angular_order() -> None:
    """
    Test that points in order around a loop correlate fully with their
    order, from any starting angle and in either direction.
    """
    lags = np.arange(1, 11)

    assert angular_order_correlation(circle(10), lags) == pytest.approx(1.0)
    assert angular_order_correlation(circle(10, start=2.5) + [4.0, -1.0], lags) == \
        pytest.approx(1.0)
    assert angular_order_correlation(circle(10)[::-1], lags) == pytest.approx(1.0)
    shuffled = circle(10)[[0, 5, 2, 8, 1, 9, 3, 6, 4, 7]]
    assert angular_order_correlation(shuffled, lags) < 0.9


def test_angular_order_errors() -> None:
    """
    Test shape errors and too few points.
    """
    with pytest.raises(tom.ShapeError):
        angular_order_correlation(np.zeros((4, 1)), [1, 2, 3, 4])
    with pytest.raises(tom.ShapeError):
        angular_order_correlation(np.zeros((4, 2)), [1, 2, 3])
    with pytest.raises(ValueError):
        angular_order_correlation(np.zeros((2, 2)), [1, 2])


def test_distance_correlation() -> None:
    """
    Test that a rotated, scaled and shifted grid recovers the true
    distances exactly.
    """
    rows, cols = np.meshgrid(np.arange(4.0), np.arange(4.0), indexing="ij")
    grid = np.stack([rows.ravel(), cols.ravel()], axis=1)
    turn = np.array([[0.6, -0.8], [0.8, 0.6]])

    assert distance_correlation(3.0 * grid @ turn + 7.0, grid) == pytest.approx(1.0)
    noise = np.random.default_rng(0).standard_normal(grid.shape)
    assert distance_correlation(noise, grid) < 0.5
    assert math.isnan(distance_correlation(np.ones((3, 2)), grid[:3]))
    with pytest.raises(tom.ShapeError):
        distance_correlation(grid, grid[:5])


def test_embedding_recovery() -> None:
    """
    Test recovery scores of a temperature task whose embeddings form a
    loop ordered by day lag.
    """
    names = [f"day{d}" for d in range(1, 11)]
    task = tom.Task(
        id="temps",
        input_vars=names,
        output_vars=[],
        splits={},
        loss_kind="mse",
        metric="rmse",
        autoencode=True,
        universe="temperature",
        oracle={name: (float(d),) for d, name in enumerate(names, start=1)},
    )
    points = circle(10, start=1.0)
    frame = pd.DataFrame({
        "task_id": ["temps"] * 10 + ["other"],
        "variable_name": names + ["x0"],
        "role": ["input"] * 11,
        "mode": ["learned"] * 11,
        "c0": list(points[:, 0]) + [5.0],
        "c1": list(points[:, 1]) + [5.0],
    })

    scores = tom.embedding_recovery(frame, task)
    assert set(scores) == {"distance_pearson", "angular_spearman"}
    assert scores["angular_spearman"] == pytest.approx(1.0)
    assert -1.0 <= scores["distance_pearson"] <= 1.0
    assert tom.embedding_recovery(frame.iloc[:2], task) == {}
    with pytest.raises(ValueError):
        tom.embedding_recovery(frame[frame["task_id"] == "other"], task)
