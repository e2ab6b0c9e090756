"""
Parent-time tree and the multi-scale Gaussian random walks built on it.

The parent of t is t with its lowest set bit cleared, so every walk value is a
sum of at most log2(T) + 1 independent increments. Increments are derived from
(seed, stream, t, arm) by a counter-based hash followed by the inverse normal
CDF, which makes every value independent of evaluation order.
"""
import math
from typing import Dict, List, Optional, Tuple
import numpy as np
from scipy.special import ndtri
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.errors import InvalidParameterError

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


class NoiseStreams:
    SHARED_WALK = 1
    PER_ARM_WALK = 2
    BERNOULLI = 3
    HIDDEN_ARM = 4


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, wrapping uint64 arithmetic"""
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, stream: int, t, arm=0) -> np.ndarray:
    """Uniform(0, 1) draws keyed by (seed, stream, t, arm); broadcasts over t and arm"""
    t = np.asarray(t, dtype=np.uint64)
    arm = np.asarray(arm, dtype=np.int64).astype(np.uint64)
    h = _mix64(np.asarray([seed & _MASK64], dtype=np.uint64))
    h = _mix64(h ^ np.uint64(stream))
    h = _mix64(h ^ t)
    h = _mix64(h ^ (arm + np.uint64(1)))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def counter_gaussian(seed: int, stream: int, t, arm=0) -> np.ndarray:
    """Standard normal draws by inverse CDF of the counter uniforms"""
    return ndtri(counter_uniform(seed, stream, t, arm))


def parent(t: int) -> int:
    """rho(t) = t - 2^delta(t), delta(t) the largest power of two dividing t"""
    if t < 1:
        raise InvalidParameterError(f"parent time is defined for t >= 1, got {t}")
    return t & (t - 1)


def ancestors(t: int) -> List[int]:
    """All iterated parents of t, descending; empty for t = 0"""
    out = []
    while t > 0:
        t = parent(t)
        out.append(t)
    return out


def cut_set(t: int, T: int) -> List[int]:
    """cut(t) = {s in [T] : rho(s) < t <= s}"""
    return [s for s in range(t, T + 1) if parent(s) < t]


def _ancestor_counts(times: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(times)
    x = times.copy()
    while np.any(x > 0):
        counts += x > 0
        x = x & (x - 1)
    return counts


def depth_and_width(T: int) -> Tuple[int, int]:
    """Exact depth max_t |S(t)| and width max_t |cut(t)| of the parent tree on [T]"""
    if T < 1:
        raise InvalidParameterError(f"horizon must be positive, got {T}")
    s = np.arange(1, T + 1, dtype=np.int64)
    depth = int(_ancestor_counts(s).max())
    # every s covers t in (rho(s), s]; a difference array counts the cover at each t
    coverage = np.zeros(T + 2, dtype=np.int64)
    np.add.at(coverage, (s & (s - 1)) + 1, 1)
    np.add.at(coverage, s + 1, -1)
    width = int(np.cumsum(coverage)[1:T + 1].max())
    return depth, width


def depth_and_width_profile(T_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """depth_and_width(T) for every T in [1, T_max], built incrementally"""
    depths = np.zeros(T_max + 1, dtype=np.int64)
    widths = np.zeros(T_max + 1, dtype=np.int64)
    cover = np.zeros(T_max + 2, dtype=np.int64)
    depth = width = 0
    for T in range(1, T_max + 1):
        lo = (T & (T - 1)) + 1
        cover[lo:T + 1] += 1
        width = max(width, int(cover[lo:T + 1].max()))
        depth = max(depth, bin(T).count("1"))
        depths[T], widths[T] = depth, width
    return depths[1:], widths[1:]


def log2_horizon(T: int) -> float:
    """Real-valued log2 T as used inside the epsilon and sigma formulas"""
    return math.log2(T)


class WalkState:
    """Memoised W_t (shared) or W_t^i (per-arm) for one run. Single writer."""

    def __init__(self, seed: int, sigma: float, per_arm: bool = False):
        if sigma < 0:
            raise InvalidParameterError(f"noise standard deviation must be nonnegative, got {sigma}")
        self.seed = seed
        self.sigma = sigma
        self.per_arm = per_arm
        self.stream = NoiseStreams.PER_ARM_WALK if per_arm else NoiseStreams.SHARED_WALK
        self.values: Dict[Tuple[int, int], float] = {}

    def increment(self, t: int, arm: int = 0) -> float:
        """xi_t (or xi_t^arm)"""
        return float(self.sigma * counter_gaussian(self.seed, self.stream, t, arm)[0])

    def increments(self, T: int, K: Optional[int] = None) -> np.ndarray:
        """xi for t = 0..T (row 0 is zero); shape (T+1,) or (T+1, K)"""
        t = np.arange(T + 1, dtype=np.uint64)
        if K is None:
            xi = self.sigma * counter_gaussian(self.seed, self.stream, t, 0)
        else:
            xi = self.sigma * counter_gaussian(self.seed, self.stream, t[:, None], np.arange(K)[None, :])
        xi[0] = 0.0
        return xi

    def materialize(self, T: int, K: Optional[int] = None) -> np.ndarray:
        """W_0..W_T in one pass over ancestor levels; identical to walk_value"""
        xi = self.increments(T, K)
        walk = np.zeros_like(xi)
        times = np.arange(T + 1, dtype=np.int64)
        levels = _ancestor_counts(times)
        for level in range(1, int(levels.max(initial=0)) + 1):
            idx = times[levels == level]
            walk[idx] = walk[idx & (idx - 1)] + xi[idx]
        return walk


def walk_value(state: WalkState, t: int, arm: Optional[int] = None) -> float:
    """W_t = W_rho(t) + xi_t with W_0 = 0, memoised per (t, arm)"""
    if t < 0:
        raise InvalidParameterError(f"walk time must be nonnegative, got {t}")
    if t == 0:
        return 0.0
    key = (t, 0 if arm is None else arm)
    cached = state.values.get(key)
    if cached is not None:
        return cached
    value = walk_value(state, parent(t), arm) + state.increment(t, key[1])
    state.values[key] = value
    return value
