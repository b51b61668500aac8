"""Holdout validation, progressive loss and best-model selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .learner import LossKind, loss_value
from .parser import Example


def is_holdout(ordinal_in_pass: int, period: int) -> bool:
    """Every ``period``-th example of a pass is held out, counting from zero."""
    if period < 2:
        raise ValueError(f"holdout period must be >= 2, got {period}")
    if ordinal_in_pass < 0:
        raise ValueError(f"ordinal must be >= 0, got {ordinal_in_pass}")
    return ordinal_in_pass % period == period - 1


def sign(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


@dataclass
class Metrics:
    mean_loss: float | None
    error_rate: float | None
    example_count: int


@dataclass
class _Accumulator:
    loss: float = 0.0
    errors: float = 0.0
    weight: float = 0.0
    count: int = 0

    def add(self, loss: float, wrong: bool, importance: float) -> None:
        self.loss += importance * loss
        self.errors += importance * wrong
        self.weight += importance
        self.count += 1

    def metrics(self) -> Metrics:
        if self.weight <= 0:
            return Metrics(None, None, self.count)
        return Metrics(self.loss / self.weight, self.errors / self.weight, self.count)


@dataclass
class HoldoutTracker:
    period: int = 10
    kind: LossKind = LossKind.SQUARED
    train: _Accumulator = field(default_factory=_Accumulator)
    holdout: _Accumulator = field(default_factory=_Accumulator)
    best_holdout_loss: float = math.inf
    per_pass_holdout: list = field(default_factory=list)
    per_pass_train: list = field(default_factory=list)
    per_pass_metrics: list = field(default_factory=list)

    def __post_init__(self):
        if self.period < 2:
            raise ValueError(f"holdout period must be >= 2, got {self.period}")

    @property
    def holdout_mean(self) -> float | None:
        return self.holdout.metrics().mean_loss

    @property
    def train_mean(self) -> float | None:
        return self.train.metrics().mean_loss


def record(
    tracker: HoldoutTracker,
    ex: Example,
    prediction,
    holdout: bool,
    kind: LossKind | None = None,
) -> None:
    """Add one labeled example's importance-weighted loss and 0/1 error.

    ``prediction`` is an ensemble prediction or a bare point score.
    """
    if ex.label is None:
        raise ValueError("cannot score an unlabeled example")
    point = float(getattr(prediction, "point", prediction))
    kind = kind or tracker.kind
    loss = loss_value(point, ex.label, kind)
    wrong = sign(point) != sign(ex.label)
    acc = tracker.holdout if holdout else tracker.train
    acc.add(loss, wrong, ex.importance)


def end_of_pass(tracker: HoldoutTracker) -> tuple[float | None, bool]:
    """Close a pass: returns (holdout mean, strictly improved on the best)."""
    mean = tracker.holdout_mean
    tracker.per_pass_holdout.append(mean)
    tracker.per_pass_train.append(tracker.train.metrics())
    tracker.per_pass_metrics.append(tracker.holdout.metrics())
    improved = mean is not None and mean < tracker.best_holdout_loss
    if improved:
        tracker.best_holdout_loss = mean
    tracker.train = _Accumulator()
    tracker.holdout = _Accumulator()
    return mean, improved
