"""
tests.test_embeddings
"""
import math

import numpy as np
import pytest
import traveling_observer as tom
from traveling_observer.embeddings import build_embedding_table, fit_to_dim, VE_INIT_STD

from .conftest import make_autoencode_task


def ids(count: int, task_id: str = "t") -> list:
    return [tom.VariableId(task_id, f"v{i}", "input") for i in range(count)]


def test_learned_init_scale() -> None:
    """
    Test that learned rows start with variance 1e-3.
    """
    table = tom.VariableEmbeddingTable(2, tom.Rng(0))
    table.register_many([(v, "learned", None) for v in ids(2000)])

    assert table.table.shape == (2000, 2)
    assert abs(table.table.values.std() - math.sqrt(1e-3)) < 0.1 * math.sqrt(1e-3)
    assert VE_INIT_STD["std"] == 1e-3


def test_init_depends_on_variable_only() -> None:
    """
    Test that a row's initial value does not depend on registration
    order.
    """
    a = tom.VariableEmbeddingTable(3, tom.Rng(0))
    b = tom.VariableEmbeddingTable(3, tom.Rng(0))
    variables = ids(4)
    a.register_many([(v, "learned", None) for v in variables])
    b.register_many([(v, "learned", None) for v in reversed(variables)])

    for v in variables:
        assert np.array_equal(a.vector(v), b.vector(v))


def test_fixed_rows_get_no_gradient() -> None:
    """
    Test that zero, random and oracle rows never receive gradient.
    """
    learned, zero, random, oracle = ids(4)
    table = tom.VariableEmbeddingTable(2, tom.Rng(0))
    table.register(learned)
    table.register(zero, "zero")
    table.register(random, "random")
    table.register(oracle, "oracle", np.array([0.5]))

    table.accumulate(np.array([0, 1, 2, 3, 0]), np.ones((5, 2)))

    assert np.array_equal(table.table.grad[0], [2.0, 2.0])
    assert not table.table.grad[1:].any()
    assert np.array_equal(table.vector(zero), [0.0, 0.0])
    assert np.array_equal(table.vector(oracle), [0.5, 0.0])
    assert table.modes == ["learned", "zero", "random", "oracle"]


def test_all_fixed_table_has_no_parameters() -> None:
    """
    Test that a table of fixed rows is not trainable.
    """
    table = tom.VariableEmbeddingTable(2, tom.Rng(0))
    table.register_many([(v, "zero", None) for v in ids(3)])

    assert not table.trainable
    assert table.parameters() == []
    assert table.table.row_sparse
    assert not table.table.decay


def test_lookup_errors() -> None:
    """
    Test unknown and duplicate variables.
    """
    table = tom.VariableEmbeddingTable(2, tom.Rng(0))
    variables = ids(2)
    table.register_many([(v, "learned", None) for v in variables])

    assert np.array_equal(table.lookup(list(reversed(variables))), [1, 0])
    with pytest.raises(tom.UnknownVariableError):
        table.lookup([tom.VariableId("other", "v0", "input")])
    with pytest.raises(ValueError):
        table.register(variables[0])
    with pytest.raises(ValueError):
        tom.VariableEmbeddingTable(0, tom.Rng(0))


def test_fit_to_dim() -> None:
    """
    Test truncation and zero padding of oracle vectors.
    """
    assert np.array_equal(fit_to_dim([1.0, 2.0, 3.0], 2), [1.0, 2.0])
    assert np.array_equal(fit_to_dim([1.0], 3), [1.0, 0.0, 0.0])


def test_oracle_gp() -> None:
    """
    Test that GP variables embed at their measurement location.
    """
    task = tom.generate_gp_universe(tom.GpUniverseConfig(seed=0, max_inputs=1, max_outputs=2))[1]
    oracle = tom.make_oracle_ves("gp", task)

    for var_id, vector in oracle.items():
        assert vector[0] == task.oracle[var_id.name][0]
        assert vector[1] == 0.0


def test_oracle_hyperspheres() -> None:
    """
    Test that class c embeds at c / 10 and feature i at the origin's
    i-th coordinate.
    """
    config = tom.HypersphereUniverseConfig(seed=0, max_features=2, max_classes=3)
    task = tom.generate_hypersphere_universe(config)[-1]
    oracle = tom.make_oracle_ves("hyperspheres", task)

    assert oracle[tom.VariableId(task.id, "class3", "output")][0] == pytest.approx(0.3)
    assert oracle[tom.VariableId(task.id, "x1", "input")][0] == task.oracle["x1"][0]


def test_oracle_pixels() -> None:
    """
    Test that pixel corners map onto the corners of [-1, 1]^2.
    """
    task = make_autoencode_task(n=4)
    oracle = tom.make_oracle_ves("cifar", task)

    assert np.allclose(oracle[tom.VariableId(task.id, "p0", "input")], [-1.0, -1.0])
    assert np.allclose(oracle[tom.VariableId(task.id, "p3", "input")], [-1.0, 1.0])


def test_oracle_needs_ground_truth(regression_task) -> None:
    """
    Test that a task without ground truth cannot use oracle embeddings.
    """
    with pytest.raises(ValueError):
        tom.make_oracle_ves("gp", regression_task)


def test_build_and_export(tmp_path, regression_task) -> None:
    """
    Test building a table for a universe and exporting it.
    """
    table = build_embedding_table([regression_task], 2, "random", tom.Rng(0))
    path = tmp_path / "ves.csv"
    table.export_csv(str(path))
    frame = table.to_frame()

    assert len(table) == 3
    assert list(frame.columns) == ["task_id", "variable_name", "role", "mode", "c0", "c1"]
    assert list(frame["role"]) == ["input", "input", "output"]
    assert path.read_text().startswith("task_id,variable_name,role,mode,c0,c1")
    with pytest.raises(ValueError):
        build_embedding_table([regression_task], 2, "fancy", tom.Rng(0))
