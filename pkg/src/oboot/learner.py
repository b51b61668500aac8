"""Importance-weighted SGD on hashed features.

All submodels live in one float32 table of shape ``(2**bits, stride)``, so
the weights of feature ``f`` for every submodel are adjacent in memory and
the flat slot of (f, i) is ``(f << log2(stride)) | i``.

Predictions accumulate in float64 in feature order for each submodel
independently, and updates round back to float32 per slot.  The result for
submodel ``i`` therefore does not depend on which other submodels are
processed in the same call.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass

import numba
import numpy as np

from .parser import Example


class LossKind(enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"

    @property
    def code(self) -> int:
        return _LOSS_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "LossKind":
        for kind, c in _LOSS_CODES.items():
            if c == code:
                return kind
        raise ValueError(f"unknown loss id {code}")


_LOSS_CODES = {LossKind.SQUARED: 0, LossKind.LOGISTIC: 1}


class DivergenceError(ArithmeticError):
    def __init__(self, message, submodel=None, ordinal=None):
        super().__init__(message)
        self.submodel = submodel
        self.ordinal = ordinal


@dataclass(frozen=True)
class LearnerConfig:
    loss: LossKind = LossKind.SQUARED
    eta0: float = 0.5
    power_t: float = 0.5

    def __post_init__(self):
        if not (self.eta0 > 0 and math.isfinite(self.eta0)):
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if not (self.power_t >= 0 and math.isfinite(self.power_t)):
            raise ValueError(f"power_t must be >= 0, got {self.power_t}")


def stride_for(n_models: int) -> int:
    return 1 << max(n_models - 1, 0).bit_length()


class WeightTable:
    """Interleaved weights for ``n_models`` submodels over ``2**bits`` features."""

    def __init__(self, bits: int, n_models: int = 1, weights: np.ndarray | None = None):
        if n_models < 1:
            raise ValueError(f"n_models must be >= 1, got {n_models}")
        self.bits = bits
        self.n_models = n_models
        self.stride = stride_for(n_models)
        self.shift = self.stride.bit_length() - 1
        size = (1 << bits) * self.stride
        if weights is None:
            weights = np.zeros(size, dtype=np.float32)
        elif weights.dtype != np.float32 or weights.shape != (size,):
            raise ValueError(f"expected {size} float32 weights, got {weights.dtype} {weights.shape}")
        self.weights = weights
        self.rows = weights.reshape(1 << bits, self.stride)
        # examples presented to each submodel; drives the learning-rate decay
        self.counts = np.zeros(n_models, dtype=np.int64)

    def slot(self, index: int, i: int) -> int:
        return (index << self.shift) | i

    def checksum(self) -> str:
        return hashlib.sha256(self.weights.tobytes()).hexdigest()

    def copy(self) -> "WeightTable":
        other = WeightTable(self.bits, self.n_models, self.weights.copy())
        other.counts = self.counts.copy()
        return other


@numba.njit(cache=True, nogil=True)
def _scores(rows, idx, vals, cols, out):
    for j in range(cols.size):
        out[j] = 0.0
    for f in range(idx.size):
        r = idx[f]
        v = vals[f]
        for j in range(cols.size):
            out[j] += np.float64(rows[r, cols[j]]) * v


@numba.njit(cache=True, nogil=True)
def _apply(rows, idx, vals, cols, coef):
    """rows[f, c] -= coef * v per feature occurrence; False if a weight blew up."""
    finite = True
    for f in range(idx.size):
        r = idx[f]
        v = vals[f]
        for j in range(cols.size):
            if coef[j] != 0.0:
                c = cols[j]
                w = np.float32(np.float64(rows[r, c]) - coef[j] * v)
                rows[r, c] = w
                if not np.isfinite(w):
                    finite = False
    return finite


def _check_cols(table: WeightTable, cols: np.ndarray) -> None:
    if cols.size and (cols.min() < 0 or cols.max() >= table.n_models):
        raise IndexError(f"submodel index out of range for N={table.n_models}")


def predict_many(table: WeightTable, ex: Example, cols: np.ndarray) -> np.ndarray:
    """Raw scores of submodels ``cols`` (no link function)."""
    out = np.empty(cols.size)
    _scores(table.rows, ex.indices, ex.values, cols, out)
    return out


def predict(table: WeightTable, ex: Example, i: int) -> float:
    if not 0 <= i < table.n_models:
        raise IndexError(f"submodel {i} out of range for N={table.n_models}")
    return float(predict_many(table, ex, np.array([i], dtype=np.int64))[0])


def loss_value(p: float, y: float, kind: LossKind) -> float:
    if kind is LossKind.SQUARED:
        return 0.5 * (p - y) ** 2
    z = -y * p
    # log(1 + e^z) without overflow
    return z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z))


def _logistic_grad(p: float, y: float) -> float:
    # -y / (1 + e^{yp}), split on sign so exp never overflows
    z = y * p
    if z >= 0:
        e = math.exp(-z)
        return -y * e / (1.0 + e)
    return -y / (1.0 + math.exp(z))


def loss_gradient(p, y: float, kind: LossKind):
    """dL/dp for a scalar score or an array of scores."""
    if kind is LossKind.SQUARED:
        return p - y
    if np.ndim(p) == 0:
        return _logistic_grad(float(p), y)
    return np.array([_logistic_grad(x, y) for x in np.asarray(p).tolist()])


def learning_rates(config: LearnerConfig, counts: np.ndarray) -> np.ndarray:
    # per element in Python: vectorized pow may round differently by length
    eta0, power_t = config.eta0, config.power_t
    return np.array([eta0 / float(t) ** power_t for t in counts.tolist()])


def update_many(
    table: WeightTable,
    ex: Example,
    cols: np.ndarray,
    zs: np.ndarray,
    config: LearnerConfig,
) -> np.ndarray:
    """One SGD step for each submodel in ``cols`` with importance ``zs``.

    Returns the pre-update raw scores.  Every listed submodel's example
    counter advances, including those drawn with zero importance.
    """
    if ex.label is None:
        raise ValueError("cannot update on an unlabeled example")
    y = float(ex.label)
    if config.loss is LossKind.LOGISTIC and y not in (-1.0, 1.0):
        raise ValueError(f"logistic loss needs labels in {{-1, +1}}, got {y}")
    zs = np.asarray(zs, dtype=np.float64)
    if not np.all(np.isfinite(zs)) or np.any(zs < 0):
        raise ValueError("importance must be finite and >= 0")
    _check_cols(table, cols)

    p = predict_many(table, ex, cols)
    g = loss_gradient(p, y, config.loss)
    table.counts[cols] += 1
    eta = learning_rates(config, table.counts[cols])
    coef = eta * zs * g
    if not _apply(table.rows, ex.indices, ex.values, cols, coef):
        touched = table.rows[ex.indices][:, cols]
        bad = int(cols[np.flatnonzero(~np.isfinite(touched).all(axis=0))[0]])
        ordinal = int(table.counts[bad])
        raise DivergenceError(
            f"non-finite weight in submodel {bad} at example {ordinal}",
            submodel=bad,
            ordinal=ordinal,
        )
    return p


def update(
    table: WeightTable, ex: Example, i: int, z: float, config: LearnerConfig
) -> None:
    if not 0 <= i < table.n_models:
        raise IndexError(f"submodel {i} out of range for N={table.n_models}")
    update_many(table, ex, np.array([i], dtype=np.int64), np.array([z]), config)
