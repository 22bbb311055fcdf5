"""
traveling_observer.subsets
"""
from __future__ import annotations

import numpy as np


def sample_variable_subset(n_vars: int, generator: np.random.Generator) -> np.ndarray:
    """
    Draws a subset size uniformly from ``1..n_vars`` and then a uniform
    subset of that size.  Returns the sorted variable indices.
    """
    if n_vars < 1:
        raise ValueError(f"need at least one variable to sample from, got {n_vars}")
    size = int(generator.integers(1, n_vars + 1))
    chosen = generator.choice(n_vars, size=size, replace=False)
    return np.sort(chosen)
