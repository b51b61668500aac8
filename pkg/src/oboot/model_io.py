"""Binary model file.

Layout (little-endian)::

    magic    4s   b"OBBS"
    version  u32
    bits     u32
    n_models u32
    stride   u32
    loss     u32
    eta0     f64
    power_t  f64
    weights  f32[2**bits * stride]
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .learner import LearnerConfig, LossKind, WeightTable, stride_for

MAGIC = b"OBBS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIdd")


class ModelFormatError(ValueError):
    pass


@dataclass
class ModelFile:
    table: WeightTable
    learner: LearnerConfig

    @property
    def bits(self) -> int:
        return self.table.bits

    @property
    def n_models(self) -> int:
        return self.table.n_models


def dumps(model: ModelFile) -> bytes:
    t = model.table
    header = _HEADER.pack(
        MAGIC, VERSION, t.bits, t.n_models, t.stride,
        model.learner.loss.code, model.learner.eta0, model.learner.power_t,
    )
    return header + t.weights.astype("<f4", copy=False).tobytes()


def loads(data: bytes) -> ModelFile:
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"truncated header: {len(data)} bytes")
    magic, version, bits, n_models, stride, loss, eta0, power_t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    if not 1 <= bits <= 31 or n_models < 1 or stride != stride_for(n_models):
        raise ModelFormatError(f"inconsistent header bits={bits} N={n_models} stride={stride}")
    expected = (1 << bits) * stride * 4
    payload = len(data) - _HEADER.size
    if payload != expected:
        raise ModelFormatError(f"payload is {payload} bytes, header implies {expected}")
    weights = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float32)
    learner = LearnerConfig(LossKind.from_code(loss), eta0, power_t)
    return ModelFile(WeightTable(bits, n_models, weights), learner)


def save(model: ModelFile, path: str | os.PathLike) -> None:
    with open(path, "wb") as f:
        write(model, f)


def write(model: ModelFile, f: BinaryIO) -> None:
    f.write(dumps(model))


def load(path: str | os.PathLike) -> ModelFile:
    with open(path, "rb") as f:
        return loads(f.read())


def dump_text(model: ModelFile, out) -> None:
    """Header fields, then ``index,submodel,weight`` for every nonzero slot."""
    t = model.table
    out.write(f"version,{VERSION}\nbits,{t.bits}\nn_models,{t.n_models}\nstride,{t.stride}\n")
    out.write(f"loss,{model.learner.loss.value}\neta0,{model.learner.eta0!r}\n")
    out.write(f"power_t,{model.learner.power_t!r}\n")
    out.write("index,submodel,weight\n")
    rows, cols = np.nonzero(t.rows[:, : t.n_models])
    for r, c in zip(rows.tolist(), cols.tolist()):
        out.write(f"{r},{c},{float(t.rows[r, c])!r}\n")
