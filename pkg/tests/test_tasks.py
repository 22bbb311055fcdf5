"""
tests.test_tasks
"""
import numpy as np
import pytest
import traveling_observer as tom
from traveling_observer.tasks import check_disjoint


def test_variable_ids(regression_task) -> None:
    """
    Test that variable ids are namespaced by task.
    """
    ids = regression_task.variable_ids

    assert [v.key() for v in ids] == ["toy/x0/input", "toy/x1/input", "toy/y0/output"]
    assert regression_task.prediction_ids == ids[2:]


def test_autoencode_predictions(autoencode_task) -> None:
    """
    Test that autoencoding tasks predict their own inputs.
    """
    assert autoencode_task.prediction_ids == autoencode_task.input_ids
    assert autoencode_task.values("train", np.arange(3)).shape == (3, 4)


def test_values(regression_task) -> None:
    """
    Test that values list inputs then outputs.
    """
    rows = np.array([4, 1])
    values = regression_task.values("val", rows)
    split = regression_task.splits["val"]

    assert np.array_equal(values[:, :2], split.inputs[rows])
    assert np.array_equal(values[:, 2:], split.targets[rows])


def test_invalid_tasks() -> None:
    """
    Test the checks on task construction.
    """
    split = {"train": tom.Split(np.zeros((3, 2)), np.zeros((3, 1)))}
    with pytest.raises(ValueError):
        tom.Task("t", ["a", "a"], ["y"], split, "mse", "mse")
    with pytest.raises(ValueError):
        tom.Task("t", ["a", "b"], ["y"], split, "hinge", "mse")
    with pytest.raises(ValueError):
        tom.Task("t", [], ["y"], {}, "mse", "mse")
    with pytest.raises(tom.ShapeError):
        tom.Task("t", ["a", "b", "c"], ["y"], split, "mse", "mse")
    with pytest.raises(ValueError):
        tom.Task("t", ["a", "b"], ["c1", "c2"], split, "squared_hinge", "accuracy")
    with pytest.raises(tom.ShapeError):
        tom.Split(np.zeros((3, 2)), labels=np.zeros(2))


def test_check_disjoint(regression_task) -> None:
    """
    Test that task ids must be unique within a universe.
    """
    with pytest.raises(ValueError):
        check_disjoint([regression_task, regression_task])
