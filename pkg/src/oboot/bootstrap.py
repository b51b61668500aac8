"""Online bootstrap reduction over the interleaved learner.

Training: for each example, draw ``Z_i`` for submodels ``i = 0..N-1`` from
one shared stream, in submodel order, and apply an importance-``Z_i`` update
to submodel ``i``.  Prediction: score the example under all N submodels and
aggregate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import learner
from .distributions import RngState, WeightMode, draw_weights
from .learner import DivergenceError, LearnerConfig, WeightTable
from .parser import Example


class Aggregate(enum.Enum):
    MEAN = "mean"
    MAJORITY = "majority"


@dataclass(frozen=True)
class BootstrapConfig:
    n_models: int = 1
    mode: WeightMode = WeightMode.SCALED
    aggregate: Aggregate = Aggregate.MEAN
    interval_level: float = 0.1

    def __post_init__(self):
        if self.n_models < 1:
            raise ValueError(f"n_models must be >= 1, got {self.n_models}")
        if not 0.0 < self.interval_level < 1.0:
            raise ValueError(f"interval_level must be in (0, 1), got {self.interval_level}")


@dataclass
class EnsemblePrediction:
    raw: np.ndarray
    point: float
    interval: tuple[float, float]
    vote_counts: tuple[int, int] | None = field(default=None)

    @property
    def lo(self) -> float:
        return self.interval[0]

    @property
    def hi(self) -> float:
        return self.interval[1]


# sampler(rng, w, n) -> n importances; replaces draw_weights in tests
Sampler = Callable[[RngState, float, int], np.ndarray]


def train_example(
    table: WeightTable,
    ex: Example,
    rng: RngState,
    config: BootstrapConfig,
    learner_config: LearnerConfig,
    sampler: Sampler | None = None,
) -> np.ndarray:
    """Update all N submodels on one labeled example.

    Returns the pre-update raw scores of the submodels.
    """
    n = config.n_models
    if table.n_models != n:
        raise ValueError(f"table holds {table.n_models} submodels, config wants {n}")
    if sampler is None:
        zs = draw_weights(rng, ex.importance, config.mode, n)
    else:
        zs = np.asarray(sampler(rng, ex.importance, n), dtype=np.float64)
    try:
        return learner.update_many(table, ex, _all_cols(n), zs, learner_config)
    except DivergenceError as err:
        raise DivergenceError(
            f"submodel {err.submodel}: {err}", submodel=err.submodel, ordinal=err.ordinal
        ) from err


_COLS: dict[int, np.ndarray] = {}


def _all_cols(n: int) -> np.ndarray:
    cols = _COLS.get(n)
    if cols is None:
        cols = _COLS[n] = np.arange(n, dtype=np.int64)
    return cols


def quantile(values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics at h = (N - 1) q."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    v = sorted(float(x) for x in values)
    if not v:
        raise ValueError("quantile of an empty sequence")
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def aggregate(raw: np.ndarray, config: BootstrapConfig) -> EnsemblePrediction:
    alpha = config.interval_level
    interval = (quantile(raw, alpha / 2), quantile(raw, 1 - alpha / 2))
    if config.aggregate is Aggregate.MAJORITY:
        # sign(0) votes positive; ties go to the positive class
        pos = int(np.count_nonzero(raw >= 0))
        neg = len(raw) - pos
        return EnsemblePrediction(raw, 1.0 if pos >= neg else -1.0, interval, (pos, neg))
    values = raw.tolist()
    lo, hi = min(values), max(values)
    point = lo if lo == hi else math.fsum(values) / len(values)
    return EnsemblePrediction(raw, point, interval)


def predict_example(
    table: WeightTable, ex: Example, config: BootstrapConfig
) -> EnsemblePrediction:
    raw = learner.predict_many(table, ex, _all_cols(table.n_models))
    return aggregate(raw, config)
