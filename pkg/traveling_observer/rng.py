"""
traveling_observer.rng

Seeded random streams.  Every consumer derives its own substream from
``(seed, label, task, step)`` through numpy's ``SeedSequence`` spawn keys
and draws from a ``PCG64`` bit generator, so a stream never depends on
how many draws another consumer made before it.
"""
from __future__ import annotations
from typing import Union

import numpy as np

from .utils import stable_hash

Key = Union[int, str]


def _key(value: Key) -> int:
    if isinstance(value, (int, np.integer)):
        if value < 0:
            raise ValueError(f"substream keys must be non-negative, got {value}")
        return int(value)
    return stable_hash(str(value))


class Rng:
    """
    Root of all randomness in a run.

    :param seed: A non-negative 64-bit seed.
    """
    algorithm = "PCG64/SeedSequence"

    def __init__(self, seed: int) -> None:
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)

    def __repr__(self) -> str:
        return f"<Rng(seed={self.seed})>"

    def derive(self, label: str, task: Key = 0, step: Key = 0) -> np.random.Generator:
        """
        Returns a fresh generator for the substream keyed by
        ``(label, task, step)``.  Identical keys always give identical
        streams.
        """
        sequence = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(stable_hash(label), _key(task), _key(step)),
        )
        return np.random.Generator(np.random.PCG64(sequence))

    def scoped(self, scope: str) -> "ScopedRng":
        """
        Returns an :class:`Rng` with the same seed whose labels are
        prefixed by ``scope``.  Independent models built from one seed
        (one per task in single-task modes) use one scope each.
        """
        return ScopedRng(self.seed, scope)


class ScopedRng(Rng):
    def __init__(self, seed: int, scope: str) -> None:
        super().__init__(seed)
        self.scope = scope

    def __repr__(self) -> str:
        return f"<ScopedRng(seed={self.seed}, scope={self.scope!r})>"

    def derive(self, label: str, task: Key = 0, step: Key = 0) -> np.random.Generator:
        return super().derive(f"{self.scope}/{label}", task, step)
