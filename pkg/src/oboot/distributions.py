"""Random draws for online bootstrapping.

The generator is splitmix64: state advances by a fixed odd increment and
each output is a bijective mix of the new state.  Because the n-th output
depends only on ``seed + n * GAMMA`` a batch of draws can be produced with
vectorized uint64 arithmetic and is identical to drawing one at a time.

Uniforms use the top 53 bits: ``(mix >> 11) * 2**-53``, so every value is
in ``[0, 1)``.
"""
from __future__ import annotations

import enum
import math
from statistics import NormalDist

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

POISSON_TABLE_SIZE = 20
DIRECT_INVERSION_LIMIT = 30.0


class WeightMode(enum.Enum):
    SCALED = "scaled"  # W * Poisson(1)
    DIRECT = "direct"  # Poisson(W)
    UNIT = "unit"  # Z = W, no resampling; diagnostic only

    @classmethod
    def parse(cls, s: str) -> "WeightMode":
        return cls(s.lower())


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class RngState:
    """Seedable splitmix64 stream with a single owner."""

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & _MASK64
        return _mix(self.state)

    def next_uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        """The next ``n`` uniforms, same values as ``n`` calls to next_uniform."""
        if n <= 0:
            return np.empty(0)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
            out = _mix_array(states)
        self.state = (self.state + n * GAMMA) & _MASK64
        return (out >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def copy(self) -> "RngState":
        clone = RngState()
        clone.state = self.state
        return clone


def next_uniform(rng: RngState) -> float:
    return rng.next_uniform()


class PoissonTable:
    """Cumulative Poisson(1) probabilities for k = 0..19.

    Past k = 19 the remaining mass is below 2**-52 and draws clamp to 19.
    """

    def __init__(self, size: int = POISSON_TABLE_SIZE):
        pmf = [math.exp(-1.0) / math.factorial(k) for k in range(size)]
        self.pmf = np.array(pmf)
        self.cdf = np.array([math.fsum(pmf[: k + 1]) for k in range(size)])

    def __len__(self) -> int:
        return len(self.cdf)

    def lookup(self, u):
        """Smallest k with cdf[k] > u, clamped to the last entry."""
        k = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(k, len(self.cdf) - 1)


POISSON_TABLE = PoissonTable()


def sample_poisson1(rng: RngState, table: PoissonTable = POISSON_TABLE) -> int:
    return int(table.lookup(rng.next_uniform()))


def _check_weight(w: float) -> float:
    w = float(w)
    if not math.isfinite(w) or w < 0:
        raise ValueError(f"importance weight must be finite and >= 0, got {w!r}")
    return w


def _poisson_cdf(lam: float) -> np.ndarray:
    """Cumulative Poisson(lam) by the recurrence a sequential search uses."""
    p = math.exp(-lam)
    cdf = [p]
    k = 0
    while True:
        k += 1
        p *= lam / k
        nxt = cdf[-1] + p
        if nxt == cdf[-1] and k > lam:
            break
        cdf.append(nxt)
    return np.array(cdf)


_STD_NORMAL = NormalDist()


def _direct(u: np.ndarray, w: float) -> np.ndarray:
    if w <= DIRECT_INVERSION_LIMIT:
        cdf = _poisson_cdf(w)
        k = np.searchsorted(cdf, u, side="right")
        return np.minimum(k, len(cdf) - 1).astype(np.float64)
    sd = math.sqrt(w)
    tiny = 2.0**-53
    z = np.array([_STD_NORMAL.inv_cdf(max(x, tiny)) for x in u.tolist()])
    return np.maximum(np.rint(w + sd * z), 0.0)


def draw_weights(
    rng: RngState,
    w: float,
    mode: WeightMode,
    n: int,
    table: PoissonTable = POISSON_TABLE,
) -> np.ndarray:
    """``n`` successive resampled importances, one uniform consumed per draw."""
    w = _check_weight(w)
    if mode is WeightMode.UNIT:
        return np.full(n, w)
    u = rng.uniforms(n)
    if mode is WeightMode.SCALED:
        return w * table.lookup(u).astype(np.float64)
    if w == 0.0:
        return np.zeros(n)
    return _direct(u, w)


def sample_weight(
    rng: RngState, w: float, mode: WeightMode = WeightMode.SCALED
) -> float:
    return float(draw_weights(rng, w, mode, 1)[0])


def poisson1_pmf(k: int) -> float:
    return math.exp(-1.0 - math.lgamma(k + 1))


def binomial_pmf(n: int, k: int) -> float:
    """Binom(n, 1/n) mass at k, evaluated in log space."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if n == 1:
        return 1.0 if k == 1 else 0.0
    log_c = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_c - k * math.log(n) + (n - k) * math.log1p(-1.0 / n))


def binom_poisson_tv_distance(n: int) -> float:
    """Total variation distance between Binom(n, 1/n) and Poisson(1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    diffs = [abs(binomial_pmf(n, k) - poisson1_pmf(k)) for k in range(n + 1)]
    # Poisson mass above n; terms vanish below double precision quickly
    tail = []
    k = n + 1
    while True:
        p = poisson1_pmf(k)
        tail.append(p)
        if p < 1e-300 or p < 1e-20 * math.fsum(tail):
            break
        k += 1
    return 0.5 * (math.fsum(diffs) + math.fsum(tail))
