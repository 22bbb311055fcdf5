"""
traveling_observer.schedules
"""
from __future__ import annotations
import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

NONE = "none"
DECREASE = "decrease"
STOP = "stop"


class PlateauSchedule:
    """
    Multiplies the learning rate by ``factor`` whenever the watched metric
    has not strictly improved for ``patience`` evaluations.  The counter
    restarts after every decrease.  Once ``max_decreases`` decreases have
    happened, the next trigger stops training instead.

    :param maximize: ``True`` for accuracies, ``False`` for losses.
    """
    def __init__(
            self,
            learning_rate: float,
            patience: int = 20,
            factor: float = 0.5,
            max_decreases: int = 5,
            maximize: bool = True
    ) -> None:
        if patience < 1:
            raise ValueError(f"patience must be positive, got {patience}")
        self.learning_rate = learning_rate
        self.patience = patience
        self.factor = factor
        self.max_decreases = max_decreases
        self.maximize = maximize
        self.best: Optional[float] = None
        self.bad_epochs = 0
        self.decreases = 0
        self.stopped = False

    def __repr__(self) -> str:
        return (
            f"<PlateauSchedule(lr={self.learning_rate:g}, best={self.best}, "
            f"bad={self.bad_epochs}, decreases={self.decreases})>"
        )

    def _improved(self, value: float) -> bool:
        if self.best is None:
            return True
        return value > self.best if self.maximize else value < self.best

    def step(self, value: float) -> str:
        """
        Records one evaluation and returns ``"none"``, ``"decrease"`` or
        ``"stop"``.
        """
        if self.stopped:
            return STOP
        if self._improved(value):
            self.best = value
            self.bad_epochs = 0
            return NONE
        self.bad_epochs += 1
        if self.bad_epochs < self.patience:
            return NONE
        self.bad_epochs = 0
        if self.decreases >= self.max_decreases:
            self.stopped = True
            logger.info("plateau after %d decreases, stopping", self.decreases)
            return STOP
        self.decreases += 1
        self.learning_rate *= self.factor
        logger.info("plateau, learning rate decreased to %g", self.learning_rate)
        return DECREASE


def plateau_schedule(
        val_history: Iterable[float],
        learning_rate: float = 1e-3,
        patience: int = 20,
        max_decreases: int = 5,
        maximize: bool = True
) -> List[str]:
    """
    Replays a validation history through a fresh :class:`PlateauSchedule`
    and returns the action taken after each epoch.
    """
    schedule = PlateauSchedule(learning_rate, patience, 0.5, max_decreases, maximize)
    return [schedule.step(value) for value in val_history]


def simple_moving_average(series: Sequence[float], window: int = 10) -> np.ndarray:
    """
    Trailing mean over the last ``window`` values; the first entries
    average over however many values exist so far.
    """
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    values = pd.Series(np.asarray(series, dtype=np.float64))
    return values.rolling(window, min_periods=1).mean().to_numpy()
