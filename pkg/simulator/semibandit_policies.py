import math
from typing import Any, Dict, List, Optional
import numpy as np
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ProblemSpec, BatchSchedule, CombinatorialArm, HullPoint, FeedbackMode, FeedbackView
from shared.config import Config, PolicyIds
from shared.errors import EstimatorError, ProjectionError, InvalidParameterError
from simulator.policy_base import Policy
from simulator.capped_simplex import (
    Regularizer, LogBarrier, NegEntropy, Hybrid,
    solve_capped_simplex, is_feasible, decompose_hull_point, sample_from_decomposition
)

THRESHOLD_INITIAL = "initial"
THRESHOLD_CURRENT = "current"

_BARRIER = LogBarrier()


def barrier_minimizer(K: int, I: int) -> HullPoint:
    """Uniform point I/K, the minimiser of sum ln(1/a_i) over the capped simplex"""
    return HullPoint(a=np.full(K, I / K), I=I)


class BroadState:
    """Log-barrier OMD iterate with the learning-rate halving epochs"""

    def __init__(self, K: int, I: int, T: int, eta0: float, reset_iterate: bool = True,
                 threshold_eta: str = THRESHOLD_INITIAL):
        if eta0 <= 0:
            raise InvalidParameterError(f"eta0 must be positive, got {eta0}")
        if threshold_eta not in (THRESHOLD_INITIAL, THRESHOLD_CURRENT):
            raise InvalidParameterError(f"threshold_eta must be 'initial' or 'current', got {threshold_eta}")
        self.K, self.I, self.T = K, I, T
        self.a_prime: np.ndarray = barrier_minimizer(K, I).a.copy()
        self.eta0 = eta0
        self.eta = eta0
        self.epochs = 0
        self.epoch_start = 0
        self.epoch_accumulator = 0.0
        self.batch_index = 0
        self.reset_iterate = reset_iterate
        self.threshold_eta = threshold_eta
        self.epoch_boundaries: List[int] = []

    @property
    def threshold(self) -> float:
        """K ln T / (3 eta^2), eta being eta0 or the current rate"""
        eta = self.eta0 if self.threshold_eta == THRESHOLD_INITIAL else self.eta
        return self.K * math.log(self.T) / (3.0 * eta ** 2)


def omd_step(state: BroadState, estimator: np.ndarray) -> HullPoint:
    """argmin_a <a, l_hat> + D_F(a, a') with F the log-barrier scaled by 1/eta"""
    estimator = np.asarray(estimator, dtype=float)
    if not np.all(np.isfinite(estimator)):
        raise EstimatorError("loss estimate is not finite")
    a_prime = np.maximum(state.a_prime, Config.HULL_FLOOR)
    if np.ptp(estimator) == 0.0 and is_feasible(a_prime, state.I):
        return HullPoint(a=a_prime, I=state.I)
    c = _BARRIER.grad(a_prime) - state.eta * estimator
    solution = solve_capped_simplex(_BARRIER, c, state.I)
    return HullPoint(a=solution.a, I=state.I)


def bregman_project(state: BroadState, point: Optional[np.ndarray] = None) -> HullPoint:
    """argmin over the capped simplex of D_F(a, point); identity on feasible points"""
    point = state.a_prime if point is None else np.asarray(point, dtype=float)
    if point.max() > 1.0 + 1e-9:
        raise ProjectionError(f"reference point has a coordinate {point.max():.12g} above 1")
    point = np.maximum(point, Config.HULL_FLOOR)
    if is_feasible(point, state.I):
        return HullPoint(a=point, I=state.I)
    solution = solve_capped_simplex(_BARRIER, _BARRIER.grad(point), state.I)
    return HullPoint(a=solution.a, I=state.I)


def importance_weighted_estimate(played: CombinatorialArm, semibandit_loss: np.ndarray,
                                 a_n: HullPoint) -> np.ndarray:
    """(l_hat)_i = A_i l_i / a_i"""
    mask = played.as_array() > 0
    if np.any(a_n.a[mask] < Config.HULL_FLOOR):
        raise EstimatorError("played coordinate has sampling probability below the floor")
    estimate = np.zeros(played.K)
    estimate[mask] = np.asarray(semibandit_loss, dtype=float)[mask] / a_n.a[mask]
    return estimate


def broad_update(state: BroadState, played: CombinatorialArm, semibandit_loss: np.ndarray,
                 a_n: HullPoint) -> BroadState:
    estimate = importance_weighted_estimate(played, semibandit_loss, a_n)
    state.a_prime = omd_step(state, estimate).a.copy()
    observed = played.as_array() * np.asarray(semibandit_loss, dtype=float)
    state.epoch_accumulator += float(observed @ observed)
    state.batch_index += 1

    if state.epoch_accumulator >= state.threshold:
        state.eta /= 2.0
        state.epochs += 1
        state.epoch_start = state.batch_index
        state.epoch_boundaries.append(state.batch_index)
        state.epoch_accumulator = 0.0
        if state.reset_iterate:
            state.a_prime = barrier_minimizer(state.K, state.I).a.copy()
        logger.debug(f"BROAD epoch {state.epochs} starts after batch {state.batch_index}: eta={state.eta:.6g}")
    return state


def broad_parameters(spec: ProblemSpec, schedule: BatchSchedule) -> float:
    """eta0 = min(1 / (18 I B^2), 1/81)"""
    B = schedule.batch_length
    return min(1.0 / (18.0 * spec.I * B ** 2), 1.0 / 81.0)


class BaselineState:
    """FTRL iterate over the capped simplex; after n batches eta_n = eta_scale / sqrt(n)"""

    def __init__(self, regularizer: Regularizer, K: int, I: int, eta_scale: float = 1.0):
        if eta_scale <= 0:
            raise InvalidParameterError(f"eta_scale must be positive, got {eta_scale}")
        self.regularizer = regularizer
        self.K, self.I = K, I
        self.eta_scale = eta_scale
        self.cumulative_estimate = np.zeros(K)
        self.batch_index = 0
        self.a: HullPoint = self._solve()

    @property
    def eta(self) -> float:
        return self.eta_scale / math.sqrt(max(self.batch_index, 1))

    def _solve(self) -> HullPoint:
        solution = solve_capped_simplex(self.regularizer, -self.eta * self.cumulative_estimate, self.I)
        return HullPoint(a=solution.a, I=self.I)


def _ftrl_step(state: BaselineState, played: CombinatorialArm, semibandit_loss: np.ndarray) -> BaselineState:
    state.cumulative_estimate += importance_weighted_estimate(played, semibandit_loss, state.a)
    state.batch_index += 1
    state.a = state._solve()
    return state


def hybrid_baseline_step(state: BaselineState, played: CombinatorialArm,
                         semibandit_loss: np.ndarray) -> BaselineState:
    """FTRL step under -sqrt(a) plus the entropy of the complement"""
    if not isinstance(state.regularizer, Hybrid):
        raise InvalidParameterError(
            f"hybrid step needs a Hybrid regularizer, got {type(state.regularizer).__name__}"
        )
    return _ftrl_step(state, played, semibandit_loss)


def negentropy_baseline_step(state: BaselineState, played: CombinatorialArm,
                             semibandit_loss: np.ndarray) -> BaselineState:
    """FTRL step under the unnormalised negative entropy"""
    if not isinstance(state.regularizer, NegEntropy):
        raise InvalidParameterError(
            f"negentropy step needs a NegEntropy regularizer, got {type(state.regularizer).__name__}"
        )
    return _ftrl_step(state, played, semibandit_loss)


class BatchedBroad(Policy):
    policy_id = PolicyIds.BROAD
    feedback_mode = FeedbackMode.SEMIBANDIT

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, eta0: Optional[float] = None,
                 reset_iterate: bool = True, threshold_eta: str = THRESHOLD_INITIAL):
        super().__init__(spec, schedule)
        eta0 = broad_parameters(spec, schedule) if eta0 is None else eta0
        self.state = BroadState(spec.K, spec.I, spec.T, eta0,
                                reset_iterate=reset_iterate, threshold_eta=threshold_eta)
        self._a_n: Optional[HullPoint] = None

    def select(self, rng: np.random.Generator) -> CombinatorialArm:
        self._a_n = bregman_project(self.state)
        return sample_from_decomposition(decompose_hull_point(self._a_n), rng)

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        broad_update(self.state, arm, self._require_semibandit(feedback), self._a_n)

    def metadata(self) -> Dict[str, Any]:
        meta = super().metadata()
        meta.update({
            "eta0": self.state.eta0,
            "final_eta": self.state.eta,
            "threshold_eta": self.state.threshold_eta,
            "reset_iterate": self.state.reset_iterate,
            "epoch_boundaries": list(self.state.epoch_boundaries),
        })
        return meta


class _BatchedFtrl(Policy):
    feedback_mode = FeedbackMode.SEMIBANDIT

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, regularizer: Regularizer,
                 eta_scale: float = 1.0):
        super().__init__(spec, schedule)
        self.state = BaselineState(regularizer, spec.K, spec.I, eta_scale=eta_scale)

    def select(self, rng: np.random.Generator) -> CombinatorialArm:
        return sample_from_decomposition(decompose_hull_point(self.state.a), rng)

    def metadata(self) -> Dict[str, Any]:
        meta = super().metadata()
        meta.update({"regularizer": self.state.regularizer.name,
                     "eta_schedule": f"{self.state.eta_scale:g}/sqrt(n)"})
        return meta


class BatchedHybrid(_BatchedFtrl):
    policy_id = PolicyIds.HYBRID

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, eta_scale: float = 1.0):
        super().__init__(spec, schedule, Hybrid(gamma=1.0), eta_scale=eta_scale)

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        hybrid_baseline_step(self.state, arm, self._require_semibandit(feedback))

    def metadata(self) -> Dict[str, Any]:
        meta = super().metadata()
        meta["hybrid_gamma"] = self.state.regularizer.gamma
        return meta


class BatchedNegEntropy(_BatchedFtrl):
    policy_id = PolicyIds.NEGENTROPY

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, eta_scale: float = 1.0):
        super().__init__(spec, schedule, NegEntropy(), eta_scale=eta_scale)

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        negentropy_baseline_step(self.state, arm, self._require_semibandit(feedback))
