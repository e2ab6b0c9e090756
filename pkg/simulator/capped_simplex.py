"""
Mirror-descent machinery on the capped simplex {0 <= a_i <= 1, sum a_i = I}.

A regularizer F(a) = sum phi(a_i) is separable, so every step reduces to
finding one dual shift nu such that sum_i min(1, (phi')^-1(c_i - nu)) = I.
The same solver serves the log-barrier OMD step, the Bregman projection and
the FTRL baselines; only the coordinate map changes.
"""
from typing import List, NamedTuple, Optional
import numpy as np
from scipy.optimize import bisect
from scipy.special import xlogy
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import HullPoint, VertexDecomposition, CombinatorialArm
from shared.config import Config
from shared.errors import ProjectionError, DecompositionError


class Regularizer:
    """Separable potential sum_i phi(a_i)"""
    name = "regularizer"

    def value(self, a: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_inverse(self, y: np.ndarray) -> np.ndarray:
        """(phi')^-1, may exceed 1 (the cap is applied by the solver)"""
        raise NotImplementedError

    def hessian(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LogBarrier(Regularizer):
    """phi(a) = -ln a"""
    name = "log_barrier"

    def value(self, a):
        return float(-np.log(a).sum())

    def grad(self, a):
        return -1.0 / a

    def grad_inverse(self, y):
        with np.errstate(divide="ignore"):
            return np.where(y < 0.0, -1.0 / np.minimum(y, -1e-300), np.inf)

    def hessian(self, a):
        return 1.0 / a ** 2


class NegEntropy(Regularizer):
    """phi(a) = a ln a - a"""
    name = "negentropy"

    def value(self, a):
        return float((xlogy(a, a) - a).sum())

    def grad(self, a):
        return np.log(a)

    def grad_inverse(self, y):
        with np.errstate(over="ignore"):
            return np.exp(y)

    def hessian(self, a):
        return 1.0 / a


class Hybrid(Regularizer):
    """phi(a) = -sqrt(a) + gamma (1 - a) ln(1 - a); phi' maps (0, 1) onto the reals"""
    name = "hybrid"
    _BISECTION_STEPS = 120

    def __init__(self, gamma: float = 1.0):
        self.gamma = gamma

    def value(self, a):
        return float((-np.sqrt(a) + self.gamma * xlogy(1.0 - a, 1.0 - a)).sum())

    def grad(self, a):
        with np.errstate(divide="ignore"):
            return -0.5 / np.sqrt(a) - self.gamma * (np.log1p(-a) + 1.0)

    def grad_inverse(self, y):
        # phi' is increasing, so a vectorised bisection on (0, 1) inverts it
        y = np.asarray(y, dtype=float)
        lo, hi = np.zeros_like(y), np.ones_like(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(self._BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                below = self.grad(mid) < y
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def hessian(self, a):
        return 0.25 / a ** 1.5 + self.gamma / (1.0 - a)


class CappedSimplexSolution(NamedTuple):
    a: np.ndarray
    nu: float


def _coordinate_map(reg: Regularizer, c: np.ndarray, nu: float) -> np.ndarray:
    return np.minimum(1.0, reg.grad_inverse(c - nu))


def solve_capped_simplex(reg: Regularizer, c: np.ndarray, I: int,
                         floor: Optional[float] = None) -> CappedSimplexSolution:
    """Minimise F(a) - <c, a> over the capped simplex.

    Stationarity reads phi'(a_i) = c_i - nu - beta_i with beta_i >= 0 only on
    capped coordinates. OMD passes c = phi'(a') - eta l_hat, FTRL passes
    c = -eta L_hat.
    """
    c = np.asarray(c, dtype=float)
    K = c.size
    floor = Config.HULL_FLOOR if floor is None else floor
    if not np.all(np.isfinite(c)):
        raise ProjectionError(f"non-finite dual input (max |c| = {np.nanmax(np.abs(c))})")
    if I == K:
        return CappedSimplexSolution(np.ones(K), float("nan"))

    anchor = float(reg.grad(np.array([I / K]))[0])
    lo, hi = float(c.min()) - anchor, float(c.max()) - anchor

    def excess(nu: float) -> float:
        return float(_coordinate_map(reg, c, nu).sum()) - I

    if hi - lo <= 0.0:
        nu = lo
    else:
        try:
            nu = bisect(excess, lo, hi, xtol=1e-13 * max(1.0, abs(lo), abs(hi)), maxiter=400)
        except (ValueError, RuntimeError) as e:
            logger.error(f"Dual root-finding failed on [{lo:.6g}, {hi:.6g}]: {e}")
            raise ProjectionError(f"could not bracket the dual shift: {e}") from e
        nu = _newton_polish(reg, c, I, nu, lo, hi)

    a = _coordinate_map(reg, c, nu)
    a = _fix_sum(a, I)
    a = np.maximum(a, floor)
    return CappedSimplexSolution(a, float(nu))


def _newton_polish(reg: Regularizer, c: np.ndarray, I: int, nu: float, lo: float, hi: float,
                   steps: int = 6) -> float:
    a = _coordinate_map(reg, c, nu)
    gap = float(a.sum()) - I
    residual = abs(gap)
    for _ in range(steps):
        free = a < 1.0
        slope = float((1.0 / reg.hessian(a[free])).sum()) if free.any() else 0.0
        if slope <= 0.0 or residual <= 1e-15:
            break
        candidate = nu + gap / slope
        if not lo <= candidate <= hi:
            break
        trial = _coordinate_map(reg, c, candidate)
        trial_gap = float(trial.sum()) - I
        if abs(trial_gap) >= residual:
            break
        nu, a, gap, residual = candidate, trial, trial_gap, abs(trial_gap)
    return nu


def _fix_sum(a: np.ndarray, I: int) -> np.ndarray:
    """Remove the last rounding error of sum(a) - I on the uncapped coordinates"""
    capped = a >= 1.0
    free_mass = float(a[~capped].sum())
    target = I - int(capped.sum())
    if free_mass > 0.0 and target > 0:
        a = a.copy()
        a[~capped] *= target / free_mass
    return np.minimum(a, 1.0)


def bregman_divergence(reg: Regularizer, p: np.ndarray, q: np.ndarray, eta: float = 1.0) -> float:
    """D(p, q) = (F(p) - F(q) - <grad F(q), p - q>) / eta"""
    return (reg.value(p) - reg.value(q) - float(reg.grad(q) @ (p - q))) / eta


def is_feasible(a: np.ndarray, I: int, tol: float = 1e-9) -> bool:
    return bool(a.min() >= 0.0 and a.max() <= 1.0 + tol and abs(float(a.sum()) - I) <= tol)


def decompose_hull_point(point: HullPoint) -> VertexDecomposition:
    """Write a point of the capped simplex as a convex combination of at most K arms.

    Greedy peeling keeps the residual r within [0, m] with sum r = I m; each
    pass takes the I largest residuals and removes the largest weight that
    keeps the invariant, which zeroes a selected coordinate or lifts an
    unselected one to the new bound.
    """
    K, I = point.K, point.I
    r = np.clip(np.array(point.a, dtype=float), 0.0, 1.0)
    m = 1.0
    vertices: List[CombinatorialArm] = []
    weights: List[float] = []
    for _ in range(K + 1):
        if m <= 1e-12:
            break
        order = np.argsort(-r, kind="stable")
        selected, rest = order[:I], order[I:]
        w = min(float(r[selected].min()), m)
        if rest.size and r[rest].max() > 0.0:
            w = min(w, m - float(r[rest].max()))
        if w <= 1e-15:
            break
        vertices.append(CombinatorialArm.from_indices(K, np.sort(selected)))
        weights.append(w)
        r[selected] -= w
        m -= w
        r[selected] = np.where(r[selected] <= 1e-15, 0.0, r[selected])
        if rest.size:
            r[rest] = np.where(r[rest] >= m - 1e-15, m, r[rest])
    else:
        raise DecompositionError(f"peeling did not terminate within {K + 1} steps")
    if m > 1e-9:
        raise DecompositionError(f"peeling stalled with residual mass {m:.3g}")
    total = sum(weights)
    return VertexDecomposition(vertices=vertices, weights=tuple(w / total for w in weights))


def sample_from_decomposition(decomposition: VertexDecomposition, rng: np.random.Generator) -> CombinatorialArm:
    """Draw a vertex with probability equal to its weight, so E[A] = a"""
    p = np.asarray(decomposition.weights, dtype=float)
    index = int(rng.choice(len(p), p=p / p.sum()))
    return decomposition.vertices[index]
