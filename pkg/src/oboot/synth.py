"""Synthetic datasets in the text example format.

Labels come from a sparse linear ground truth over a vocabulary of
``n_features`` names, plus noise.  With ``quadratic`` set to q, each example also
carries q dense features and all of their pairwise products, and the ground
truth has matching interaction terms; this fills the hashed table much
faster than the sparse part alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np


@dataclass(frozen=True)
class SynthConfig:
    n_examples: int = 1000
    n_features: int = 10000
    per_example: int = 20
    sparsity: float = 0.1
    noise: float = 0.5
    task: str = "binary"  # or "regression"
    quadratic: int = 0
    binary_values: bool = False
    normalize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("binary", "regression"):
            raise ValueError(f"task must be 'binary' or 'regression', got {self.task!r}")
        if self.per_example < 1 or self.n_features < 1:
            raise ValueError("need at least one feature")
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError(f"sparsity must be in (0, 1], got {self.sparsity}")


_VALUE_STEPS = 300  # raw values are multiples of 0.01 in [-3, 3]


def _value_table(scale: float) -> tuple[list[str], np.ndarray]:
    text = [f"{k / 100 * scale:.4g}" for k in range(-_VALUE_STEPS, _VALUE_STEPS + 1)]
    return text, np.array([float(t) for t in text])


def _truth(cfg: SynthConfig, rng: np.random.Generator):
    w = rng.normal(size=cfg.n_features)
    w[rng.random(cfg.n_features) >= cfg.sparsity] = 0.0
    q = cfg.quadratic
    wq = np.triu(rng.normal(size=(q, q))) / max(q, 1) if q else None
    return w, wq


def iter_lines(cfg: SynthConfig) -> Iterator[str]:
    rng = np.random.default_rng(cfg.seed)
    w, wq = _truth(cfg, rng)
    names = [f"{i}:" for i in range(cfg.n_features)]
    plain = [f"{i}" for i in range(cfg.n_features)]
    k = cfg.per_example
    scale = 1.0 / math.sqrt(k)
    # normalized rows have unit expected squared norm; labels are unaffected
    value_text, value_float = _value_table(scale if cfg.normalize else 1.0)
    for _ in range(cfg.n_examples):
        ids = rng.integers(0, cfg.n_features, size=k)
        if cfg.binary_values:
            raw = np.ones(k)
            body = " ".join([plain[i] for i in ids.tolist()])
        else:
            steps = np.clip(np.rint(rng.normal(size=k) * 100), -_VALUE_STEPS, _VALUE_STEPS)
            raw = steps / 100
            pos = (steps + _VALUE_STEPS).astype(int).tolist()
            body = " ".join([names[i] + value_text[j] for i, j in zip(ids.tolist(), pos)])
        score = float(w[ids] @ raw) * scale
        if cfg.quadratic:
            dense = np.round(rng.normal(size=cfg.quadratic), 2)
            score += float(dense @ wq @ dense)
            toks = [f"d{a}:{x:.2f}" for a, x in enumerate(dense.tolist())]
            for a in range(cfg.quadratic):
                for b in range(a, cfg.quadratic):
                    toks.append(f"d{a}*d{b}:{dense[a] * dense[b]:.4f}")
            body += " |q " + " ".join(toks)
        noisy = score + cfg.noise * rng.normal()
        if cfg.task == "binary":
            label = "1" if noisy >= 0 else "-1"
        else:
            label = f"{noisy:.6f}"
        yield f"{label} |f {body}"


def write(cfg: SynthConfig, out: TextIO) -> int:
    n = 0
    for line in iter_lines(cfg):
        out.write(line)
        out.write("\n")
        n += 1
    return n


def write_file(cfg: SynthConfig, path) -> int:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        return write(cfg, f)
