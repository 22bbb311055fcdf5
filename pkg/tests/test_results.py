"""
tests.test_results
"""
import json
import math

import pandas as pd
import pytest
import traveling_observer as tom
from traveling_observer.results import read_results, reported_table


def history(metric: str, vals, tests) -> tom.TaskHistory:
    h = tom.TaskHistory("t", metric)
    for epoch, (val, test) in enumerate(zip(vals, tests), start=1):
        h.record(epoch, val, test)
    return h


def test_best_validation_epoch() -> None:
    """
    Test that the test metric is reported at the first best validation
    epoch, in the direction of the metric.
    """
    acc = history("accuracy", [50.0, 80.0, 80.0, 70.0], [40.0, 75.0, 90.0, 95.0])
    err = history("mse", [0.5, 0.2, 0.3], [0.6, 0.25, 0.1])

    assert acc.best_epoch == 2
    assert acc.reported_test == 75.0
    assert err.best_epoch == 2
    assert err.best_val == 0.2


def test_without_validation() -> None:
    """
    Test that tasks without a validation split report the last epoch.
    """
    h = history("bce", [None, None, None], [0.7, 0.6, 0.65])

    assert not h.has_val
    assert h.reported_test == 0.65
    assert math.isnan(h.val[0])
    with pytest.raises(ValueError):
        tom.TaskHistory("t", "bce").best_index()


def test_finetuned_overrides_joint() -> None:
    """
    Test that a finetuned history replaces the joint one when reporting.
    """
    result = tom.RunResult(config=tom.RunConfig())
    result.histories["a"] = history("accuracy", [10.0], [20.0])
    result.histories["b"] = history("accuracy", [10.0], [30.0])
    result.finetuned["b"] = history("accuracy", [15.0], [35.0])

    assert result.reported() == {"a": 20.0, "b": 35.0}


def test_write_and_read(tmp_path) -> None:
    """
    Test the run artifacts and reading the reported metrics back.
    """
    config = tom.resolve_config("micro")
    result = tom.RunResult(config=config, train_loss=[1.0, 0.5], steps_run=100)
    result.histories["a"] = history("mse", [0.5, 0.2], [0.6, 0.25])
    result.histories["cifar"] = history("bce", [None, None], [0.7, 0.6])
    result.finetuned["a"] = history("mse", [0.1], [0.15])
    paths = result.write(str(tmp_path))

    frame = pd.read_csv(paths["results"])
    assert list(frame.columns) == ["task_id", "epoch", "split", "metric_name", "value"]
    assert set(frame["split"]) == {"val", "test", "train", "finetune-val", "finetune-test"}
    assert len(frame[frame["task_id"] == "*"]) == 2

    metadata = json.loads((tmp_path / "metadata.json").read_text())
    assert metadata["steps_run"] == 100
    assert metadata["reported_test"] == {"a": 0.15, "cifar": 0.6}
    assert metadata["decisions"]["rank_ties"] == "average"
    assert metadata["config"]["run"]["preset"] == "micro"
    assert metadata["started"].endswith("+00:00")
    assert "[trainer]" in (tmp_path / "config.txt").read_text()

    histories = read_results(paths["results"])
    assert histories["a"].reported_test == 0.15
    assert histories["cifar"].reported_test == 0.6
    assert not histories["cifar"].has_val


def test_read_results_missing_columns(tmp_path) -> None:
    """
    Test that a CSV without the result columns is rejected.
    """
    path = tmp_path / "results.csv"
    path.write_text("task_id,value\na,1\n")

    with pytest.raises(tom.FormatError):
        read_results(str(path))


def test_reported_table() -> None:
    """
    Test the methods by tasks table.
    """
    table = reported_table({
        "tom": {"a": history("mse", [0.1], [0.2]), "b": history("mse", [0.1], [0.3])},
        "dr": {"a": history("mse", [0.1], [0.4]), "b": history("mse", [0.1], [0.5])},
    })

    assert list(table.index) == ["tom", "dr"]
    assert table.at["dr", "b"] == 0.5
