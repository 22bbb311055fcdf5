"""
tests.conftest
"""
from typing import Iterable, Optional

import numpy as np
import pytest
import traveling_observer as tom


def make_regression_task(task_id: str = "toy", n: int = 2, m: int = 1, size: int = 30,
                         seed: int = 0) -> tom.Task:
    gen = np.random.default_rng(seed)
    weights = gen.standard_normal((n, m))
    splits = {}
    for split in ("train", "val", "test"):
        x = gen.standard_normal((size, n))
        splits[split] = tom.Split(x, x @ weights)
    return tom.Task(
        id=task_id,
        input_vars=[f"x{i}" for i in range(n)],
        output_vars=[f"y{j}" for j in range(m)],
        splits=splits,
        loss_kind="mse",
        metric="mse",
    )


def make_classification_task(task_id: str = "blobs", size: int = 20, seed: int = 0) -> tom.Task:
    gen = np.random.default_rng(seed)
    splits = {}
    for split in ("train", "val", "test"):
        labels = np.arange(size) % 2
        x = gen.standard_normal((size, 2)) * 0.1 + np.where(labels[:, None] == 1, 1.0, -1.0)
        splits[split] = tom.Split(x, labels=labels)
    return tom.Task(
        id=task_id,
        input_vars=["x0", "x1"],
        output_vars=["class1", "class2"],
        splits=splits,
        loss_kind="squared_hinge",
        metric="accuracy",
    )


def make_autoencode_task(task_id: str = "pixels", n: int = 4, size: int = 12,
                         seed: int = 0) -> tom.Task:
    gen = np.random.default_rng(seed)
    splits = {
        split: tom.Split(gen.uniform(0.0, 1.0, (size, n))) for split in ("train", "val", "test")
    }
    return tom.Task(
        id=task_id,
        input_vars=[f"p{i}" for i in range(n)],
        output_vars=[],
        splits=splits,
        loss_kind="bce",
        metric="bce",
        autoencode=True,
        universe="cifar",
        oracle={f"p{i}": (0.0, float(i), float(n)) for i in range(n)},
    )


def unrolled_affine(layer: tom.Affine, x: np.ndarray) -> np.ndarray:
    """
    ``x W + b`` for a single vector, one output coordinate at a time.
    """
    out = layer.bias.values.astype(np.float64).copy()
    for j in range(layer.fan_out):
        for i in range(layer.fan_in):
            out[j] += x[i] * layer.weight.values[i, j]
    return out


def unrolled_film(film: tom.FilmLayer, h: np.ndarray, z: np.ndarray) -> np.ndarray:
    return unrolled_affine(film.scale, z) * h + unrolled_affine(film.shift, z)


def unrolled_block(
        block: tom.ResidualBlock,
        h: np.ndarray,
        z: Optional[np.ndarray] = None
) -> np.ndarray:
    u = np.maximum(unrolled_affine(block.fc1, h), 0.0)
    if block.film1 is not None:
        u = unrolled_film(block.film1, u, z)
    u = np.maximum(unrolled_affine(block.fc2, u), 0.0)
    if block.film2 is not None:
        u = unrolled_film(block.film2, u, z)
    return h + block.alpha.values[0] * u


def set_alphas(blocks: Iterable[tom.ResidualBlock], value: float) -> None:
    for block in blocks:
        block.alpha.assign(np.array([value]))


@pytest.fixture
def regression_task() -> tom.Task:
    return make_regression_task()


@pytest.fixture
def classification_task() -> tom.Task:
    return make_classification_task()


@pytest.fixture
def autoencode_task() -> tom.Task:
    return make_autoencode_task()
