"""
tests.test_gradcheck
"""
from typing import Callable

import numpy as np
import traveling_observer as tom
from traveling_observer.gradcheck import relative_error


def quadratic(
        param: tom.ParamTensor,
        scale: float = 1.0,
        offset: float = 0.0
) -> Callable[[], float]:
    def closure() -> float:
        param.grad += scale * param.values + offset
        return 0.5 * float(np.sum(param.values ** 2))
    return closure


def test_correct_gradient_passes() -> None:
    """
    Test that an exact gradient passes and is restored afterwards.
    """
    param = tom.ParamTensor("w", np.array([[1.0, -2.0], [0.5, 3.0]]))
    report = tom.grad_check(quadratic(param), [param], tolerance=1e-6)

    assert report.passed
    assert report.checked == 4
    assert not report.failures
    assert np.allclose(param.grad, param.values)
    assert report.summary().startswith("PASS")


def test_wrong_gradient_fails() -> None:
    """
    Test that a wrong gradient is reported with its coordinate.
    """
    param = tom.ParamTensor("w", np.array([1.0, 2.0]))
    report = tom.grad_check(quadratic(param, scale=2.0), [param], tolerance=1e-6)

    assert not report.passed
    assert len(report.failures) == 2
    assert report.worst.name == "w"
    assert "FAIL" in report.summary()


def test_coordinate_sampling() -> None:
    """
    Test that at most the requested number of coordinates are checked.
    """
    param = tom.ParamTensor("w", np.linspace(-1.0, 1.0, 50))
    report = tom.grad_check(quadratic(param), [param], max_coords_per_param=5)

    assert report.checked == 5


def test_relative_error_floor() -> None:
    """
    Test that two tiny gradients do not divide by zero.
    """
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-12, 0.0) == 1e-12 / 1e-8


def test_micro_problem_passes() -> None:
    """
    Test the end-to-end gradient of the micro model.
    """
    problem = tom.build_micro_problem(seed=0)
    report = tom.grad_check(problem.closure, problem.params, tolerance=1e-4, max_coords_per_param=8)

    assert problem.model.relu_margin() > 1e-4
    assert report.passed, report.summary()


def test_micro_problem_includes_embeddings() -> None:
    """
    Test that learned embeddings and SkipInit scalars are checked.
    """
    problem = tom.build_micro_problem(seed=1)
    names = {p.name for p in problem.params}

    assert "ve.table" in names
    assert "core.block0.alpha" in names
    assert all(block.alpha.values[0] > 0 for block in problem.model.core.blocks)
