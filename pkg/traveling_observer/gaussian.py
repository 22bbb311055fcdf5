"""
traveling_observer.gaussian
"""
from __future__ import annotations
import logging
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import FactorizationError, ShapeError

logger = logging.getLogger(__name__)

INITIAL_JITTER = 1e-8
MAX_JITTER = 1e-4


def rbf_kernel(
        locations_a: np.ndarray,
        locations_b: Optional[np.ndarray] = None,
        length_scale: float = 1.0
) -> np.ndarray:
    """
    Squared-exponential kernel ``exp(-(a - b)^2 / (2 l^2))`` between two
    sets of 1-D locations.
    """
    a = np.asarray(locations_a, dtype=np.float64).reshape(-1, 1)
    b = a if locations_b is None else np.asarray(locations_b, dtype=np.float64).reshape(-1, 1)
    sqdist = (a - b.T) ** 2
    return np.exp(-0.5 * sqdist / length_scale ** 2)


def jittered_cholesky(K: np.ndarray) -> np.ndarray:
    """
    Returns the lower Cholesky factor of ``K + jitter I``.  The jitter
    starts at 1e-8 and is multiplied by 10 on each failure up to 1e-4.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"covariance must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12):
        raise ShapeError("covariance must be symmetric")

    eye = np.eye(K.shape[0])
    jitter = INITIAL_JITTER
    while jitter <= MAX_JITTER * (1 + 1e-9):
        try:
            return linalg.cholesky(K + jitter * eye, lower=True)
        except linalg.LinAlgError:
            logger.warning("Cholesky failed with jitter %.0e, escalating", jitter)
            jitter *= 10.0
    raise FactorizationError(
        f"covariance of size {K.shape[0]} is not positive definite "
        f"even with jitter {MAX_JITTER:.0e}"
    )


def cholesky_sample(
        K: np.ndarray,
        generator: np.random.Generator,
        count: Optional[int] = None
) -> np.ndarray:
    """
    Draws from the zero-mean Gaussian with covariance ``K``.

    :param K: Symmetric positive semi-definite matrix of shape ``[n, n]``.
    :param generator: Source of the standard normal draws.
    :param count: Number of draws.  ``None`` returns a single vector of
                  shape ``[n]``; otherwise the shape is ``[count, n]``.
    """
    L = jittered_cholesky(K)
    n = L.shape[0]
    if count is None:
        return L @ generator.standard_normal(n)
    return (L @ generator.standard_normal((n, count))).T
