"""
tests.test_deep_residual
"""
import numpy as np
import pytest
import traveling_observer as tom

from .conftest import set_alphas, unrolled_affine, unrolled_block


def test_heads_share_the_trunk() -> None:
    """
    Test that every task adds its own input and output layer around one
    trunk.
    """
    model = tom.DrModel(tom.Rng(0), hidden=4, num_blocks=2)
    trunk = len(model.parameters())
    model.register_task("a", 3, 2)
    model.register_task("b", 1, 5)

    assert len(model.parameters()) == trunk + 8
    assert tom.dr_forward(model, "a", np.zeros((6, 3))).shape == (6, 2)
    assert tom.dr_forward(model, "b", np.zeros((6, 1))).shape == (6, 5)
    assert "head.b.output.weight" in model.named_arrays()


def test_errors() -> None:
    """
    Test unknown tasks, duplicate heads, bad inputs and a missing forward.
    """
    model = tom.DrModel(tom.Rng(0), hidden=4, num_blocks=1)
    model.register_task("a", 3, 2)

    with pytest.raises(tom.UnknownTaskError):
        model.forward("b", np.zeros((1, 3)))
    with pytest.raises(ValueError):
        model.register_task("a", 3, 2)
    with pytest.raises(tom.ShapeError):
        model.forward("a", np.zeros((1, 4)))
    with pytest.raises(RuntimeError):
        model.backward(np.zeros((1, 2)))


def test_gradients() -> None:
    """
    Test trunk and head gradients.
    """
    gen = np.random.default_rng(0)
    model = tom.DrModel(tom.Rng(0), hidden=5, num_blocks=2)
    model.register_task("a", 3, 2)
    for block in model.blocks:
        block.alpha.assign(np.array([0.5]))
    x = gen.standard_normal((4, 3))
    target = gen.standard_normal((4, 2))

    def closure() -> float:
        loss, grad = tom.mse_loss(model.forward("a", x), target)
        model.backward(grad)
        return loss

    report = tom.grad_check(closure, model.parameters(), tolerance=1e-5)
    assert report.passed, report.summary()


def test_other_heads_untouched() -> None:
    """
    Test that a step on one task leaves another task's head without
    gradient.
    """
    model = tom.DrModel(tom.Rng(0), hidden=4, num_blocks=1)
    model.register_task("a", 2, 1)
    model.register_task("b", 2, 1)
    out = model.forward("a", np.ones((3, 2)))
    model.backward(np.ones_like(out))

    first, last = model.head("b")
    assert not first.weight.grad.any()
    assert not last.weight.grad.any()
    assert model.head("a")[1].weight.grad.any()


def test_forward_matches_unrolled_loops() -> None:
    """
    Test the batched forward pass against a per-sample computation.
    """
    model = tom.DrModel(tom.Rng(2), hidden=5, num_blocks=2)
    model.register_task("a", 3, 2)
    set_alphas(model.blocks, 0.9)
    first, last = model.head("a")
    x = np.random.default_rng(6).standard_normal((4, 3))

    expected = []
    for row in x:
        h = unrolled_affine(first, row)
        for block in model.blocks:
            h = unrolled_block(block, h)
        expected.append(unrolled_affine(last, h))

    assert np.allclose(tom.dr_forward(model, "a", x), expected, rtol=1e-12, atol=1e-12)


def test_fresh_trunk_is_the_identity() -> None:
    """
    Test that at init the output is the task's output layer applied to
    its input layer.
    """
    model = tom.DrModel(tom.Rng(0), hidden=4, num_blocks=3)
    model.register_task("a", 2, 3)
    first, last = model.head("a")
    x = np.random.default_rng(1).standard_normal((5, 2))

    assert np.array_equal(tom.dr_forward(model, "a", x), last.forward(first.forward(x)))
