"""
traveling_observer.gradcheck

Central finite-difference verification of analytic gradients.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .params import ParamTensor, zero_grads

logger = logging.getLogger(__name__)

STEP = 1e-5
FLOOR = 1e-8


@dataclass
class GradCheckFailure:
    name: str
    index: Tuple[int, ...]
    analytic: float
    numeric: float
    relative_error: float


@dataclass
class GradCheckReport:
    """
    Outcome of :func:`grad_check`.  ``failures`` lists every checked
    coordinate whose relative error reached the tolerance.
    """
    tolerance: float
    checked: int = 0
    max_relative_error: float = 0.0
    worst: Optional[GradCheckFailure] = None
    failures: List[GradCheckFailure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = ""
        if self.worst is not None:
            where = f" (worst: {self.worst.name}{list(self.worst.index)})"
        return (
            f"{status}: {self.checked} coordinates, max relative error "
            f"{self.max_relative_error:.3e} vs tolerance {self.tolerance:.1e}{where}"
        )


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), FLOOR)


def grad_check(
        closure: Callable[[], float],
        params: Sequence[ParamTensor],
        tolerance: float = 1e-6,
        max_coords_per_param: Optional[int] = None,
        seed: int = 0
) -> GradCheckReport:
    """
    Compares analytic gradients with central differences.

    :param closure: Computes the scalar loss for the current parameter
                    values and accumulates analytic gradients into the
                    parameters' ``grad`` buffers.  It must be deterministic
                    (eval-mode dropout, fixed data).
    :param params: Parameters to check.  Values should be 64-bit.
    :param tolerance: Pass iff every relative error is below this.
    :param max_coords_per_param: Sample at most this many coordinates per
                                 tensor; ``None`` checks all of them.
    :param seed: Seed for coordinate sampling.
    """
    zero_grads(params)
    closure()
    analytic = {id(p): p.grad.copy() for p in params}

    report = GradCheckReport(tolerance=tolerance)
    gen = np.random.default_rng(seed)

    for param in params:
        coords = np.arange(param.size)
        if max_coords_per_param is not None and coords.size > max_coords_per_param:
            coords = np.sort(gen.choice(coords, size=max_coords_per_param, replace=False))

        for flat_index in coords:
            index = tuple(int(i) for i in np.unravel_index(flat_index, param.shape))
            original = param.values[index]
            param.values[index] = original + STEP
            loss_plus = closure()
            param.values[index] = original - STEP
            loss_minus = closure()
            param.values[index] = original

            numeric = (loss_plus - loss_minus) / (2.0 * STEP)
            exact = float(analytic[id(param)].reshape(-1)[flat_index])
            error = relative_error(exact, numeric)
            report.checked += 1

            if error >= report.max_relative_error:
                report.max_relative_error = error
                report.worst = GradCheckFailure(param.name, index, exact, numeric, error)
            if error >= tolerance:
                report.failures.append(GradCheckFailure(param.name, index, exact, numeric, error))

    zero_grads(params)
    for param in params:
        param.grad += analytic[id(param)]

    logger.debug(report.summary())
    return report
