"""
traveling_observer.synthetic

Generators for the two synthetic universes.  Every task draws from its own
substream of the run's :class:`~traveling_observer.rng.Rng`, so a task's
data does not depend on how many other tasks were generated or in which
order worker threads ran.
"""
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .gaussian import cholesky_sample, rbf_kernel
from .rng import Rng
from .tasks import Split, Task
from .utils import get_thread_count

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass
class GpUniverseConfig:
    """
    Tasks are measurements of a 1-D Gaussian process at random locations;
    each sample is an independent function draw.  Every combination of
    ``1..max_inputs`` inputs and ``1..max_outputs`` outputs is one task.
    """
    seed: int = 0
    length_scale: float = 1.0
    location_range: Tuple[float, float] = (0.0, 5.0)
    max_inputs: int = 10
    max_outputs: int = 10
    n_train: int = 10
    n_val: int = 10
    n_test: int = 100

    @property
    def grid(self) -> List[Tuple[int, int]]:
        return [
            (n, m)
            for n in range(1, self.max_inputs + 1)
            for m in range(1, self.max_outputs + 1)
        ]


@dataclass
class HypersphereUniverseConfig:
    """
    Classification tasks over ``n`` features with ``m`` classes; class
    ``c`` lies on the sphere of radius ``c`` around a task origin.
    Sample counts are per class.
    """
    seed: int = 0
    max_features: int = 10
    min_classes: int = 2
    max_classes: int = 10
    n_train: int = 5
    n_val: int = 5
    n_test: int = 100

    @property
    def grid(self) -> List[Tuple[int, int]]:
        return [
            (n, m)
            for n in range(1, self.max_features + 1)
            for m in range(self.min_classes, self.max_classes + 1)
        ]


def gp_task_id(n_inputs: int, n_outputs: int) -> str:
    return f"gp-i{n_inputs}-o{n_outputs}"


def hypersphere_task_id(n_features: int, n_classes: int) -> str:
    return f"hyperspheres-n{n_features}-m{n_classes}"


def _fan_out(fn: Callable[[Tuple[int, int]], T], grid: Sequence[Tuple[int, int]]) -> List[T]:
    threads = get_thread_count()
    if threads == 1:
        return [fn(cell) for cell in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, grid))


def make_gp_task(config: GpUniverseConfig, rng: Rng, n_inputs: int, n_outputs: int) -> Task:
    task_id = gp_task_id(n_inputs, n_outputs)
    generator = rng.derive("gp", task_id)
    low, high = config.location_range
    locations = generator.uniform(low, high, size=n_inputs + n_outputs)
    kernel = rbf_kernel(locations, length_scale=config.length_scale)
    total = config.n_train + config.n_val + config.n_test
    samples = cholesky_sample(kernel, generator, count=total)

    input_vars = [f"x{i}" for i in range(n_inputs)]
    output_vars = [f"y{j}" for j in range(n_outputs)]
    bounds = np.cumsum([0, config.n_train, config.n_val, config.n_test])
    splits = {
        name: Split(
            inputs=samples[bounds[k]:bounds[k + 1], :n_inputs],
            targets=samples[bounds[k]:bounds[k + 1], n_inputs:],
        )
        for k, name in enumerate(("train", "val", "test"))
    }
    oracle = {
        name: (float(loc),) for name, loc in zip(input_vars + output_vars, locations)
    }
    return Task(
        id=task_id,
        input_vars=input_vars,
        output_vars=output_vars,
        splits=splits,
        loss_kind="mse",
        metric="mse",
        autoencode=True,
        universe="gp",
        oracle=oracle,
    )


def generate_gp_universe(config: Optional[GpUniverseConfig] = None) -> List[Task]:
    """
    Generates one task per grid cell in row-major ``(inputs, outputs)``
    order.
    """
    config = config or GpUniverseConfig()
    rng = Rng(config.seed)
    tasks = _fan_out(lambda cell: make_gp_task(config, rng, *cell), config.grid)
    logger.info("generated %d GP tasks (seed %d)", len(tasks), config.seed)
    return tasks


def sphere_directions(generator: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """
    Returns ``count`` unit vectors drawn uniformly from the sphere in
    ``dim`` dimensions; in one dimension this is a random sign.
    """
    if dim == 1:
        return generator.choice(np.array([-1.0, 1.0]), size=(count, 1))
    directions = generator.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return directions / norms


def make_hypersphere_task(
        config: HypersphereUniverseConfig,
        rng: Rng,
        n_features: int,
        n_classes: int
) -> Task:
    task_id = hypersphere_task_id(n_features, n_classes)
    generator = rng.derive("hyperspheres", task_id)
    origin = generator.standard_normal(n_features)

    splits = {}
    for name, per_class in (("train", config.n_train), ("val", config.n_val),
                            ("test", config.n_test)):
        inputs, labels = [], []
        for c in range(1, n_classes + 1):
            inputs.append(origin + c * sphere_directions(generator, per_class, n_features))
            labels.append(np.full(per_class, c - 1, dtype=np.int64))
        splits[name] = Split(inputs=np.concatenate(inputs), labels=np.concatenate(labels))

    input_vars = [f"x{i}" for i in range(n_features)]
    output_vars = [f"class{c}" for c in range(1, n_classes + 1)]
    oracle = {name: (float(o),) for name, o in zip(input_vars, origin)}
    oracle.update({name: (float(c),) for c, name in enumerate(output_vars, start=1)})
    return Task(
        id=task_id,
        input_vars=input_vars,
        output_vars=output_vars,
        splits=splits,
        loss_kind="squared_hinge",
        metric="accuracy",
        autoencode=False,
        universe="hyperspheres",
        oracle=oracle,
    )


def generate_hypersphere_universe(
        config: Optional[HypersphereUniverseConfig] = None
) -> List[Task]:
    config = config or HypersphereUniverseConfig()
    rng = Rng(config.seed)
    tasks = _fan_out(lambda cell: make_hypersphere_task(config, rng, *cell), config.grid)
    logger.info("generated %d hypersphere tasks (seed %d)", len(tasks), config.seed)
    return tasks
