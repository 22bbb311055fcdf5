"""
tests.test_film_blocks
"""
import numpy as np
import pytest
import traveling_observer as tom
from traveling_observer.layers import EVAL


def test_film_modulate() -> None:
    """
    Test that FiLM scales and shifts by affine maps of the embedding.
    """
    layer = tom.FilmLayer("film", 1, 2, tom.Rng(0))
    layer.scale.weight.assign(np.array([[2.0, 3.0]]))
    layer.scale.bias.assign(np.zeros(2))
    layer.shift.weight.assign(np.zeros((1, 2)))
    layer.shift.bias.assign(np.ones(2))

    out = tom.film_modulate(np.array([[1.0, 1.0], [0.0, 2.0]]), np.array([1.0]), layer)

    assert np.allclose(out, [[3.0, 4.0], [1.0, 7.0]])


def test_film_shared_hidden_state() -> None:
    """
    Test that one hidden state broadcasts over several embeddings.
    """
    layer = tom.FilmLayer("film", 2, 3, tom.Rng(0))
    h = np.ones((1, 4, 3))
    z = np.random.default_rng(0).standard_normal((5, 2))

    out = layer.forward(h, z)
    assert out.shape == (5, 4, 3)
    grad_h, grad_z = layer.backward(np.ones_like(out))
    assert grad_h.shape == (5, 4, 3)
    assert grad_z.shape == (5, 2)


def test_film_shape_errors() -> None:
    """
    Test that hidden states and embeddings must agree.
    """
    layer = tom.FilmLayer("film", 2, 3, tom.Rng(0))
    with pytest.raises(tom.ShapeError):
        layer.forward(np.ones((2, 4, 3)), np.ones((5, 2)))
    with pytest.raises(tom.ShapeError):
        layer.forward(np.ones((4, 3)), np.ones((1, 2)))


def test_film_gradients() -> None:
    """
    Test FiLM gradients, including the one flowing into the embeddings.
    """
    gen = np.random.default_rng(1)
    layer = tom.FilmLayer("film", 2, 3, tom.Rng(0))
    h = gen.standard_normal((2, 4, 3))
    z = tom.ParamTensor("z", gen.standard_normal((2, 2)))
    weights = gen.standard_normal((2, 4, 3))

    def closure() -> float:
        out = layer.forward(h, z.values)
        _, grad_z = layer.backward(weights)
        z.grad += grad_z
        return float(np.sum(out * weights))

    report = tom.grad_check(closure, layer.parameters() + [z], tolerance=1e-6)
    assert report.passed, report.summary()


def test_fresh_block_is_identity() -> None:
    """
    Test that a block starts as the identity whatever its weights.
    """
    h = np.random.default_rng(0).standard_normal((3, 5, 4))
    z = np.random.default_rng(1).standard_normal((3, 2))
    frb = tom.ResidualBlock("frb", 4, tom.Rng(0), dropout_rate=0.5, cond_dim=2)
    crb = tom.ResidualBlock("crb", 4, tom.Rng(0))

    assert frb.alpha.values[0] == 0.0
    assert np.array_equal(frb.forward(h, z), h)
    assert np.array_equal(crb.forward(h[0]), h[0])


def test_block_kinds() -> None:
    """
    Test the parameters of conditioned and core blocks.
    """
    frb = tom.ResidualBlock("frb", 4, tom.Rng(0), cond_dim=2)
    crb = tom.ResidualBlock("crb", 4, tom.Rng(0))

    assert frb.kind == "FRB"
    assert crb.kind == "CRB"
    assert len(crb.parameters()) == 5
    assert len(frb.parameters()) == 13
    assert crb.parameters()[-1] is crb.alpha


@pytest.mark.parametrize("cond_dim", [None, 2])
def test_block_gradients(cond_dim) -> None:
    """
    Test residual block gradients with a non-zero branch scale.
    """
    gen = np.random.default_rng(3)
    block = tom.ResidualBlock("block", 5, tom.Rng(0), cond_dim=cond_dim)
    block.alpha.assign(np.array([0.7]))
    h = gen.standard_normal((2, 6, 5))
    z = gen.standard_normal((2, 2)) if cond_dim else None
    weights = gen.standard_normal((2, 6, 5))

    def closure() -> float:
        out = block.forward(h, z, EVAL)
        block.backward(weights)
        return float(np.sum(out * weights))

    report = tom.grad_check(closure, block.parameters(), tolerance=1e-5)
    assert report.passed, report.summary()


def test_block_dropout_in_training() -> None:
    """
    Test that dropout only acts in training mode.
    """
    block = tom.ResidualBlock("block", 8, tom.Rng(0), dropout_rate=0.5)
    block.alpha.assign(np.array([1.0]))
    h = np.random.default_rng(0).standard_normal((16, 8))
    ctx = tom.ForwardContext(training=True, generator=np.random.default_rng(0))

    assert np.array_equal(block.forward(h), block.forward(h, None, EVAL))
    assert not np.array_equal(block.forward(h, None, ctx), block.forward(h))
