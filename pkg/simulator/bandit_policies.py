import math
from itertools import combinations
from typing import Any, Dict, Optional, Tuple
import numpy as np
from scipy.special import logsumexp
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ProblemSpec, BatchSchedule, CombinatorialArm, FeedbackMode, FeedbackView
from shared.config import Config, PolicyIds
from shared.errors import EnumerationTooLargeError, EstimatorError, InvalidParameterError
from simulator.policy_base import Policy


def enumerate_arms(K: int, I: int) -> np.ndarray:
    """All C(K, I) arms as rows of a 0/1 matrix, lexicographic in the chosen indices"""
    count = math.comb(K, I)
    if count > Config.MAX_ENUMERATED_ARMS:
        raise EnumerationTooLargeError(
            f"C({K},{I}) = {count} arms exceeds the enumeration limit {Config.MAX_ENUMERATED_ARMS}"
        )
    arms = np.zeros((count, K))
    for row, chosen in enumerate(combinations(range(K), I)):
        arms[row, list(chosen)] = 1.0
    return arms


def build_exploration_distribution(K: int, I: int, arms: Optional[np.ndarray] = None) -> np.ndarray:
    """Uniform distribution over the enumerated action set"""
    count = arms.shape[0] if arms is not None else math.comb(K, I)
    if count > Config.MAX_ENUMERATED_ARMS:
        raise EnumerationTooLargeError(f"C({K},{I}) = {count} arms exceeds the enumeration limit")
    return np.full(count, 1.0 / count)


class Exp2State:
    """Exponential weights over enumerated arms, kept in the log domain"""

    def __init__(self, arms: np.ndarray, gamma: float, eta: float, mu: Optional[np.ndarray] = None):
        count = arms.shape[0]
        if mu is None:
            mu = np.full(count, 1.0 / count)
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (count,) or mu.min() < 0.0 or not math.isclose(mu.sum(), 1.0, abs_tol=1e-12):
            raise InvalidParameterError("exploration distribution must be a probability vector over the arms")
        if not 0.0 <= gamma <= 1.0:
            raise InvalidParameterError(f"gamma must lie in [0, 1], got {gamma}")
        self.arms = arms
        self.gamma = gamma
        self.eta = eta
        self.mu = mu
        self.log_q = np.full(count, -math.log(count))
        self.batch_index = 0

    @property
    def q(self) -> np.ndarray:
        return np.exp(self.log_q)

    @property
    def p(self) -> np.ndarray:
        return (1.0 - self.gamma) * self.q + self.gamma * self.mu

    def arm(self, index: int) -> CombinatorialArm:
        return CombinatorialArm(bits=self.arms[index])

    def apply_log_update(self, delta: np.ndarray) -> None:
        logits = self.log_q - delta
        if not np.all(np.isfinite(logits)):
            raise EstimatorError("exponential-weights update produced non-finite logits")
        self.log_q = logits - logsumexp(logits)
        self.batch_index += 1


class CovarianceOperator:
    """Sigma = E_{A~p}[A A^T] and its eigenvalue-thresholded pseudo-inverse"""

    def __init__(self, matrix: np.ndarray, rank_tolerance: Optional[float] = None):
        self.matrix = 0.5 * (matrix + matrix.T)
        self.rank_tolerance = Config.PINV_RANK_TOLERANCE if rank_tolerance is None else rank_tolerance
        eigvals, eigvecs = np.linalg.eigh(self.matrix)
        cutoff = self.rank_tolerance * max(float(eigvals.max()), 0.0)
        keep = eigvals > cutoff
        self.eigenvalues = eigvals
        self.rank = int(keep.sum())
        self.pinv = (eigvecs[:, keep] / eigvals[keep]) @ eigvecs[:, keep].T


def exp2_covariance(p: np.ndarray, arms: np.ndarray) -> CovarianceOperator:
    return CovarianceOperator(arms.T @ (p[:, None] * arms))


def exp2_select(state: Exp2State, rng: np.random.Generator) -> Tuple[int, CombinatorialArm]:
    """Sample from p = (1 - gamma) q + gamma mu; the harness replays the arm for the batch"""
    p = state.p
    index = int(rng.choice(p.size, p=p / p.sum()))
    return index, state.arm(index)


def exp2_estimate(state: Exp2State, played: CombinatorialArm, batch_loss_total: float) -> np.ndarray:
    """l_tilde = X Sigma^+ A"""
    covariance = exp2_covariance(state.p, state.arms)
    estimate = batch_loss_total * (covariance.pinv @ played.as_array())
    if not np.all(np.isfinite(estimate)):
        raise EstimatorError(
            f"loss estimate is not finite (covariance rank {covariance.rank}, "
            f"min eigenvalue {covariance.eigenvalues.min():.3g})"
        )
    return estimate


def exp2_update(state: Exp2State, played: CombinatorialArm, batch_loss_total: float) -> Exp2State:
    if batch_loss_total == 0.0 or state.eta == 0.0:
        state.batch_index += 1
        return state
    estimate = exp2_estimate(state, played, batch_loss_total)
    state.apply_log_update(state.eta * (state.arms @ estimate))
    return state


def exp2_parameters(spec: ProblemSpec, schedule: BatchSchedule) -> Tuple[float, float]:
    """(gamma, eta) with eta = sqrt(ln C(K,I) / (3 N K (B I)^2)) and gamma = eta B I K"""
    count = math.comb(spec.K, spec.I)
    if count == 1:
        logger.warning(f"Single arm action set (I = K = {spec.K}); learning rate is zero")
        return 0.0, 0.0
    B, N = schedule.batch_length, schedule.nominal_batches
    eta = math.sqrt(math.log(count) / (3.0 * N * spec.K * (B * spec.I) ** 2))
    gamma = eta * B * spec.I * spec.K
    if gamma >= 1.0:
        raise InvalidParameterError(
            f"exploration rate gamma={gamma:.4g} >= 1 for K={spec.K}, I={spec.I}, B={B}, N={N}"
        )
    return gamma, eta


def exp3_estimate(state: Exp2State, played_index: int, batch_loss_total: float) -> np.ndarray:
    """Each arm is an atomic meta-arm: l_hat_j = X 1{j = played} / p_j"""
    p_played = float(state.p[played_index])
    if p_played <= 0.0:
        raise EstimatorError(f"played meta-arm {played_index} had probability {p_played}")
    estimate = np.zeros(state.arms.shape[0])
    estimate[played_index] = batch_loss_total / p_played
    return estimate


def exp3_baseline_update(state: Exp2State, played_index: int, batch_loss_total: float) -> Exp2State:
    estimate = exp3_estimate(state, played_index, batch_loss_total)
    if batch_loss_total == 0.0 or state.eta == 0.0:
        state.batch_index += 1
        return state
    state.apply_log_update(state.eta * estimate)
    return state


class BatchedExp2(Policy):
    """Exponential weights with exploration mixing and the covariance-based estimator"""
    policy_id = PolicyIds.EXP2
    feedback_mode = FeedbackMode.BANDIT

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, eta: Optional[float] = None,
                 gamma: Optional[float] = None, mu: Optional[np.ndarray] = None):
        super().__init__(spec, schedule)
        default_gamma, default_eta = exp2_parameters(spec, schedule)
        arms = enumerate_arms(spec.K, spec.I)
        self.state = Exp2State(
            arms,
            gamma=default_gamma if gamma is None else gamma,
            eta=default_eta if eta is None else eta,
            mu=mu,
        )
        self.custom_mu = mu is not None
        self._last_index: Optional[int] = None
        logger.debug(f"{self.policy_id}: {arms.shape[0]} arms, eta={self.state.eta:.6g}, gamma={self.state.gamma:.6g}")

    def select(self, rng: np.random.Generator) -> CombinatorialArm:
        self._last_index, arm = exp2_select(self.state, rng)
        return arm

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        exp2_update(self.state, arm, feedback.bandit_value)

    def metadata(self) -> Dict[str, Any]:
        meta = super().metadata()
        meta.update({
            "eta": self.state.eta,
            "gamma": self.state.gamma,
            "exploration": "custom" if self.custom_mu else "uniform",
            "arms": int(self.state.arms.shape[0]),
        })
        return meta


class BatchedExp3(BatchedExp2):
    """Baseline: exponential weights over meta-arms with uniform mixing"""
    policy_id = PolicyIds.EXP3

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule, eta: Optional[float] = None,
                 gamma: Optional[float] = None):
        super().__init__(spec, schedule, eta=eta, gamma=gamma)

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        exp3_baseline_update(self.state, self._last_index, feedback.bandit_value)

    def metadata(self) -> Dict[str, Any]:
        meta = super().metadata()
        meta["estimator"] = "importance-weighted meta-arm"
        return meta
