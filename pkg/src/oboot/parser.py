"""Text example format and the hashing trick.

Line grammar::

    line    := [label [importance] ['tag]] '|' section ('|' section)*
    section := [namespace](space feature)*
    feature := name[':'value]

The namespace token must abut the ``|``.  Feature names are hashed with
64-bit FNV-1a over ``namespace + "^" + name`` and masked to the low ``bits``
bits of the hash.

Features are scanned by a small compiled kernel; the header (label,
importance, tag) is handled in Python since it is a handful of tokens.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1

MAX_BITS = 31

_FLOAT_RE = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


class ParseError(ValueError):
    """Malformed example line."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class RawFeature:
    namespace: str
    name: str
    value: float = 1.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("feature name must be non-empty")
        if not math.isfinite(self.value):
            raise ValueError(f"feature value must be finite, got {self.value!r}")


@dataclass(frozen=True)
class ParserConfig:
    bits: int = 18

    def __post_init__(self):
        if not 1 <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [1, {MAX_BITS}], got {self.bits}")

    @property
    def mask(self) -> int:
        return (1 << self.bits) - 1


@dataclass(eq=False)
class Example:
    """A parsed example.

    ``indices`` and ``values`` are parallel arrays holding the hashed
    features in input order (duplicates are kept).
    """

    label: float | None
    importance: float
    tag: str | None
    indices: np.ndarray
    values: np.ndarray

    @property
    def features(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    @property
    def labeled(self) -> bool:
        return self.label is not None

    def __len__(self) -> int:
        return len(self.indices)

    def __eq__(self, other):
        if not isinstance(other, Example):
            return NotImplemented
        return (
            _same_float(self.label, other.label)
            and _same_float(self.importance, other.importance)
            and self.tag == other.tag
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


def _same_float(a, b) -> bool:
    if a is None or b is None:
        return a is b
    return a == b


def fnv1a_64(data: bytes, h: int = FNV_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


def hash_feature(namespace: str, name: str, bits: int) -> int:
    if not name:
        raise ValueError("feature name must be non-empty")
    return fnv1a_64(f"{namespace}^{name}".encode()) & ((1 << bits) - 1)


# --------------------------------------------------------------------------
# compiled feature scanner

_POW10 = np.array([10.0**k for k in range(23)])

_FAST = 0  # value parsed exactly by the kernel
_SLOW = 1  # value span must be parsed by Python


@numba.njit(cache=True, inline="always")
def _is_space(c):
    return c == 32 or (9 <= c <= 13)


@numba.njit(cache=True, inline="always")
def _fast_float(buf, lo, hi, pow10):
    """Exact decimal parse for the common case, else (0.0, False).

    Exact when the significand fits in 53 bits and the decimal exponent is
    within the range of exactly representable powers of ten.
    """
    i = lo
    neg = False
    if i < hi and (buf[i] == 43 or buf[i] == 45):
        neg = buf[i] == 45
        i += 1
    mant = 0
    exp10 = 0
    ndig = 0
    while i < hi and 48 <= buf[i] <= 57:
        if mant >= 100000000000000000:
            return 0.0, False
        mant = mant * 10 + (buf[i] - 48)
        ndig += 1
        i += 1
    if i < hi and buf[i] == 46:
        i += 1
        while i < hi and 48 <= buf[i] <= 57:
            if mant >= 100000000000000000:
                return 0.0, False
            mant = mant * 10 + (buf[i] - 48)
            exp10 -= 1
            ndig += 1
            i += 1
    if ndig == 0:
        return 0.0, False
    if i < hi and (buf[i] == 101 or buf[i] == 69):
        i += 1
        eneg = False
        if i < hi and (buf[i] == 43 or buf[i] == 45):
            eneg = buf[i] == 45
            i += 1
        e = 0
        edig = 0
        while i < hi and 48 <= buf[i] <= 57:
            if e < 10000:
                e = e * 10 + (buf[i] - 48)
            edig += 1
            i += 1
        if edig == 0:
            return 0.0, False
        exp10 += -e if eneg else e
    if i != hi:
        return 0.0, False
    if mant > 9007199254740992 or exp10 < -22 or exp10 > 22:
        return 0.0, False
    v = float(mant)
    if exp10 >= 0:
        v = v * pow10[exp10]
    else:
        v = v / pow10[-exp10]
    return (-v if neg else v), True


@numba.njit(cache=True, nogil=True)
def _scan_features(buf, start, pow10):
    """Scan sections starting right after the first ``|``.

    Returns (hashes, values, status, vstart, vend, count, err_pos) where
    err_pos >= 0 marks an empty feature name at that byte offset.
    """
    n_bytes = buf.size
    cap = (n_bytes - start) // 2 + 2
    hashes = np.empty(cap, dtype=np.uint64)
    values = np.empty(cap, dtype=np.float64)
    status = np.zeros(cap, dtype=np.uint8)
    vstart = np.zeros(cap, dtype=np.int64)
    vend = np.zeros(cap, dtype=np.int64)
    prime = np.uint64(FNV_PRIME)
    n = 0
    pos = start
    while True:
        h0 = np.uint64(FNV_OFFSET)
        while pos < n_bytes and not _is_space(buf[pos]) and buf[pos] != 124:
            h0 = (h0 ^ np.uint64(buf[pos])) * prime
            pos += 1
        h0 = (h0 ^ np.uint64(94)) * prime
        while pos < n_bytes:
            c = buf[pos]
            if _is_space(c):
                pos += 1
                continue
            if c == 124:
                break
            tok = pos
            h = h0
            while pos < n_bytes:
                c = buf[pos]
                if _is_space(c) or c == 124 or c == 58:
                    break
                h = (h ^ np.uint64(c)) * prime
                pos += 1
            if pos == tok:
                return hashes[:n], values[:n], status[:n], vstart[:n], vend[:n], n, pos
            hashes[n] = h
            if pos < n_bytes and buf[pos] == 58:
                pos += 1
                lo = pos
                while pos < n_bytes and not _is_space(buf[pos]) and buf[pos] != 124:
                    pos += 1
                v, ok = _fast_float(buf, lo, pos, pow10)
                values[n] = v
                if not ok:
                    status[n] = _SLOW
                    vstart[n] = lo
                    vend[n] = pos
            else:
                values[n] = 1.0
            n += 1
        if pos >= n_bytes:
            break
        pos += 1
    return hashes[:n], values[:n], status[:n], vstart[:n], vend[:n], n, -1


# --------------------------------------------------------------------------


def _column(raw: bytes, offset: int) -> int:
    return len(raw[:offset].decode("utf-8", errors="replace")) + 1


def _parse_number(tok: bytes, what: str, raw: bytes, offset: int, lineno) -> float:
    if _FLOAT_RE.fullmatch(tok) is None:
        raise ParseError(
            f"malformed {what} {tok.decode('utf-8', 'replace')!r}",
            lineno,
            _column(raw, offset),
        )
    value = float(tok)
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {tok.decode()!r}", lineno, _column(raw, offset))
    return value


def _header_tokens(head: bytes) -> list[tuple[int, bytes]]:
    out = []
    for m in re.finditer(rb"[^ \t\n\r\x0b\x0c]+", head):
        out.append((m.start(), m.group()))
    return out


def parse_line(line: str | bytes, config: ParserConfig, lineno: int | None = None) -> Example:
    raw = line.encode("utf-8") if isinstance(line, str) else bytes(line)
    bar = raw.find(b"|")
    if bar < 0:
        raise ParseError("missing '|'", lineno, _column(raw, len(raw.rstrip())))

    label = None
    importance = 1.0
    tag = None
    numbers = []
    for offset, tok in _header_tokens(raw[:bar]):
        if tag is not None:
            raise ParseError("unexpected token after tag", lineno, _column(raw, offset))
        if tok.startswith(b"'"):
            tag = tok[1:].decode("utf-8")
            continue
        if len(numbers) == 2:
            raise ParseError("too many header tokens", lineno, _column(raw, offset))
        what = "label" if not numbers else "importance"
        numbers.append(_parse_number(tok, what, raw, offset, lineno))
        if what == "importance" and numbers[-1] < 0:
            raise ParseError("negative importance", lineno, _column(raw, offset))
    if numbers:
        label = numbers[0]
    if len(numbers) == 2:
        importance = numbers[1]

    buf = np.frombuffer(raw, dtype=np.uint8)
    hashes, values, status, vstart, vend, n, err = _scan_features(buf, bar + 1, _POW10)
    if err >= 0:
        raise ParseError("empty feature name", lineno, _column(raw, err))
    if status.any():
        for k in np.flatnonzero(status).tolist():
            lo, hi = int(vstart[k]), int(vend[k])
            values[k] = _parse_number(raw[lo:hi], "feature value", raw, lo, lineno)
    indices = (hashes & np.uint64(config.mask)).astype(np.int64)
    return Example(label, importance, tag, indices, values)


class Parser:
    """Stateful front end that counts the lines it has parsed."""

    def __init__(self, config: ParserConfig, skip_bad_lines: bool = False):
        self.config = config
        self.skip_bad_lines = skip_bad_lines
        self.lines_parsed = 0
        self.bad_lines = 0

    def parse(self, line: str | bytes, lineno: int | None = None) -> Example:
        self.lines_parsed += 1
        return parse_line(line, self.config, lineno)

    def iter_lines(self, lines: Iterable[bytes | str]) -> Iterator[Example]:
        """Parse a stream, skipping blank lines (and bad ones if configured)."""
        for lineno, line in enumerate(lines, 1):
            line = line.rstrip(b"\r\n") if isinstance(line, bytes) else line.rstrip("\r\n")
            if not line.strip():
                continue
            try:
                yield self.parse(line, lineno)
            except ParseError:
                if not self.skip_bad_lines:
                    raise
                self.bad_lines += 1


def _format_float(x: float) -> str:
    return repr(float(x))


def format_line(
    features: Sequence[RawFeature],
    label: float | None = None,
    importance: float = 1.0,
    tag: str | None = None,
) -> str:
    """Render raw fields as a line that :func:`parse_line` accepts."""
    head = []
    if label is not None:
        head.append(_format_float(label))
        if importance != 1.0:
            head.append(_format_float(importance))
    elif importance != 1.0:
        raise ValueError("importance requires a label")
    if tag is not None:
        head.append("'" + tag)

    sections: list[str] = []
    current = None
    for feat in features:
        if feat.namespace != current or not sections:
            sections.append(feat.namespace)
            current = feat.namespace
        tok = feat.name if feat.value == 1.0 else f"{feat.name}:{_format_float(feat.value)}"
        sections[-1] += " " + tok
    body = "|".join(sections) if sections else ""
    return " ".join(head) + " |" + body if head else "|" + body


def build_example(
    features: Sequence[RawFeature],
    config: ParserConfig,
    label: float | None = None,
    importance: float = 1.0,
    tag: str | None = None,
) -> Example:
    indices = np.array(
        [hash_feature(f.namespace, f.name, config.bits) for f in features], dtype=np.int64
    )
    values = np.array([f.value for f in features], dtype=np.float64)
    return Example(label, float(importance), tag, indices, values)
