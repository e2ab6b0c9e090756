import math
from typing import Dict, List, Optional, Tuple, Union
import numpy as np
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import (
    AdversaryConfig, AdversaryKind, NoiseProfile, ProblemSpec,
    CombinatorialArm, LossVector, FeedbackMode, FeedbackView
)
from shared.errors import AdversaryConfigError, ReplayFileError, DimensionMismatchError
from simulator.tree_noise import (
    WalkState, NoiseStreams, counter_uniform, walk_value, log2_horizon
)

SC_GROWTH = 1.6


def clip(values: np.ndarray) -> np.ndarray:
    """clip(alpha) = min(max(alpha, 0), 1)"""
    return np.minimum(np.maximum(values, 0.0), 1.0)


def _check_horizon(spec: ProblemSpec) -> float:
    if spec.T < 2:
        raise AdversaryConfigError("lower-bound sequences need T >= 2 so that log2 T > 0")
    return log2_horizon(spec.T)


def cin_parameters(spec: ProblemSpec, scale: float = 1.0,
                   profile: NoiseProfile = NoiseProfile.THEOREM) -> Tuple[float, float]:
    """(epsilon, sigma) of the identical-noise sequence"""
    log_t = _check_horizon(spec)
    if spec.lam <= 0:
        raise AdversaryConfigError("identical-noise sequence needs lambda > 0")
    eps = (spec.lam * spec.K) ** (1.0 / 3.0) * (spec.I * spec.T) ** (-1.0 / 3.0) / (9.0 * log_t)
    if profile == NoiseProfile.THEOREM:
        sigma = 1.0 / (6.0 * math.sqrt(log_t * math.log2(4.0 * spec.T * (spec.lam + eps) / eps)))
    else:
        sigma = 1.0 / (9.0 * log_t)
    return _scaled(eps, sigma, scale)


def cdn_parameters(spec: ProblemSpec, scale: float = 1.0,
                   profile: NoiseProfile = NoiseProfile.THEOREM) -> Tuple[float, float]:
    """(epsilon, sigma) of the diverse-noise sequence; both profiles share sigma = 1/(9 log2 T)"""
    log_t = _check_horizon(spec)
    eps = (spec.lam * spec.K) ** (1.0 / 3.0) * spec.I ** (-2.0 / 3.0) * spec.T ** (-1.0 / 3.0) / (9.0 * log_t)
    sigma = 1.0 / (9.0 * log_t)
    return _scaled(eps, sigma, scale)


def _scaled(eps: float, sigma: float, scale: float) -> Tuple[float, float]:
    if scale <= 0:
        raise AdversaryConfigError(f"scale must be positive, got {scale}")
    eps, sigma = eps * scale, sigma * scale
    if eps >= 0.5:
        raise AdversaryConfigError(f"epsilon={eps:.4g} >= 1/2 saturates the losses; reduce scale or raise T")
    return eps, sigma


def draw_hidden_arm(spec: ProblemSpec, seed: int) -> CombinatorialArm:
    """chi drawn uniformly from the action set, fixed for the run"""
    keys = counter_uniform(seed, NoiseStreams.HIDDEN_ARM, 0, np.arange(spec.K))
    chosen = np.sort(np.argsort(keys, kind="stable")[:spec.I])
    return CombinatorialArm.from_indices(spec.K, chosen)


def sc_phase_lengths(count: int) -> List[int]:
    """T_i = floor(1.6^i) for i = 1..count"""
    return [int(math.floor(SC_GROWTH ** i)) for i in range(1, count + 1)]


def sc_phase_boundaries(T: int) -> List[int]:
    """Cumulative phase ends t_1 < t_2 < ... covering [1, T] (the last may pass T)"""
    ends, total, i = [], 0, 1
    while total < T:
        total += int(math.floor(SC_GROWTH ** i))
        ends.append(total)
        i += 1
    return ends


def sc_means(spec: ProblemSpec, alpha_check: float, phase_index: int) -> np.ndarray:
    """Bernoulli means of the stochastically constrained adversary; phase 1 is odd"""
    gap = alpha_check * spec.lam
    means = np.empty(spec.K)
    if phase_index % 2 == 1:
        means[:spec.I], means[spec.I:] = 1.0 - gap, 1.0
    else:
        means[:spec.I], means[spec.I:] = 0.0, gap
    if means.min() < 0.0 or means.max() > 1.0:
        raise AdversaryConfigError("SC means fall outside [0, 1]")
    return means


class Adversary:
    """Oblivious loss sequence: a pure function of (config, seed, t)"""

    def __init__(self, config: AdversaryConfig):
        self.config = config
        self.spec = config.spec
        self._matrix: Optional[np.ndarray] = None

    @property
    def label(self) -> str:
        return self.config.label

    def _build(self) -> np.ndarray:
        raise NotImplementedError

    def loss_matrix(self) -> np.ndarray:
        """The whole T x K sequence, materialised once"""
        if self._matrix is None:
            matrix = self._build()
            matrix.setflags(write=False)
            self._matrix = matrix
            logger.debug(f"Materialised {self.label} losses: shape={matrix.shape}, seed={self.config.seed}")
        return self._matrix

    def loss(self, t: int) -> LossVector:
        if not 1 <= t <= self.spec.T:
            raise IndexError(f"round {t} outside [1, {self.spec.T}]")
        return LossVector(values=self.loss_matrix()[t - 1])


class _GaussianTreeAdversary(Adversary):
    per_arm = False

    def __init__(self, config: AdversaryConfig):
        super().__init__(config)
        self.epsilon, self.sigma = self.parameters(config)
        self.chi = config.chi or draw_hidden_arm(self.spec, config.seed)
        self._unclipped: Optional[np.ndarray] = None
        logger.info(
            f"{self.label} adversary: eps={self.epsilon:.6g}, sigma={self.sigma:.6g}, chi={self.chi.indices}"
        )

    @staticmethod
    def parameters(config: AdversaryConfig) -> Tuple[float, float]:
        raise NotImplementedError

    def unclipped_matrix(self) -> np.ndarray:
        if self._unclipped is None:
            state = WalkState(self.config.seed, self.sigma, per_arm=self.per_arm)
            if self.per_arm:
                walk = state.materialize(self.spec.T, self.spec.K)[1:]
            else:
                walk = state.materialize(self.spec.T)[1:, None]
            self._unclipped = walk + 0.5 - self.epsilon * self.chi.as_array()[None, :]
        return self._unclipped

    def _build(self) -> np.ndarray:
        return clip(self.unclipped_matrix())

    def clipped_mask(self) -> np.ndarray:
        raw = self.unclipped_matrix()
        return (raw < 0.0) | (raw > 1.0)


class CinAdversary(_GaussianTreeAdversary):
    """Identical noise: every base arm shares W_t"""

    @staticmethod
    def parameters(config: AdversaryConfig) -> Tuple[float, float]:
        return cin_parameters(config.spec, config.scale, config.noise_profile)


class CdnAdversary(_GaussianTreeAdversary):
    """Diverse noise: base arm x follows its own walk W_t^x"""
    per_arm = True

    @staticmethod
    def parameters(config: AdversaryConfig) -> Tuple[float, float]:
        return cdn_parameters(config.spec, config.scale, config.noise_profile)


class ScAdversary(Adversary):
    """Stochastically constrained adversary with geometric phases of length floor(1.6^i)"""

    def _build(self) -> np.ndarray:
        T, K = self.spec.T, self.spec.K
        ends = np.asarray(sc_phase_boundaries(T))
        t = np.arange(1, T + 1)
        phase = np.searchsorted(ends, t, side="left") + 1
        means = np.where((phase % 2 == 1)[:, None],
                         sc_means(self.spec, self.config.alpha_check, 1)[None, :],
                         sc_means(self.spec, self.config.alpha_check, 2)[None, :])
        u = counter_uniform(self.config.seed, NoiseStreams.BERNOULLI, t[:, None], np.arange(K)[None, :])
        return (u < means).astype(float)


class ReplayAdversary(Adversary):
    """Losses read verbatim from a headerless CSV of K columns"""

    def __init__(self, config: AdversaryConfig):
        super().__init__(config)
        self.path = config.replay_path
        self.rows = load_replay_file(self.path, self.spec.K)
        if self.rows.shape[0] < self.spec.T:
            raise ReplayFileError(f"{self.path} has {self.rows.shape[0]} rows, horizon needs {self.spec.T}")

    def _build(self) -> np.ndarray:
        return np.array(self.rows[:self.spec.T], dtype=float)


def load_replay_file(path: str, K: Optional[int] = None) -> np.ndarray:
    if not os.path.exists(path):
        raise ReplayFileError(f"replay file not found: {path}")
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as e:
        raise ReplayFileError(f"malformed replay file {path}: {e}") from e
    if rows.size == 0:
        raise ReplayFileError(f"replay file {path} is empty")
    if K is not None and rows.shape[1] != K:
        raise ReplayFileError(f"{path} has {rows.shape[1]} columns, expected K={K}")
    if not np.all(np.isfinite(rows)) or rows.min() < 0.0 or rows.max() > 1.0:
        raise ReplayFileError(f"{path} contains values outside [0, 1]")
    return rows


def validate_replay_file(path: str, K: Optional[int] = None) -> Dict[str, float]:
    rows = load_replay_file(path, K)
    summary = {"rows": int(rows.shape[0]), "columns": int(rows.shape[1]),
               "min": float(rows.min()), "max": float(rows.max())}
    logger.info(f"Replay file {path} is valid: {summary}")
    return summary


_ADVERSARIES = {
    AdversaryKind.CIN: CinAdversary,
    AdversaryKind.CDN: CdnAdversary,
    AdversaryKind.SC: ScAdversary,
    AdversaryKind.REPLAY: ReplayAdversary,
}


def build_adversary(config: AdversaryConfig) -> Adversary:
    return _ADVERSARIES[config.kind](config)


def _single_round(config: AdversaryConfig, t: int, per_arm: bool,
                  params: Tuple[float, float]) -> LossVector:
    spec = config.spec
    if not 1 <= t <= spec.T:
        raise IndexError(f"round {t} outside [1, {spec.T}]")
    eps, sigma = params
    chi = config.chi or draw_hidden_arm(spec, config.seed)
    state = WalkState(config.seed, sigma, per_arm=per_arm)
    if per_arm:
        walk = np.array([walk_value(state, t, x) for x in range(spec.K)])
    else:
        walk = np.full(spec.K, walk_value(state, t))
    return LossVector(values=clip(walk + 0.5 - eps * chi.as_array()))


def cin_loss(config: AdversaryConfig, t: int) -> LossVector:
    """L_t,x = clip(W_t + 1/2 - eps chi_x)"""
    params = cin_parameters(config.spec, config.scale, config.noise_profile)
    return _single_round(config, t, per_arm=False, params=params)


def cdn_loss(config: AdversaryConfig, t: int) -> LossVector:
    """L_t,x = clip(W_t^x + 1/2 - eps chi_x)"""
    params = cdn_parameters(config.spec, config.scale, config.noise_profile)
    return _single_round(config, t, per_arm=True, params=params)


def sc_loss(config: AdversaryConfig, t: int) -> LossVector:
    spec = config.spec
    if not 1 <= t <= spec.T:
        raise IndexError(f"round {t} outside [1, {spec.T}]")
    ends = sc_phase_boundaries(t)
    phase = int(np.searchsorted(np.asarray(ends), t, side="left")) + 1
    means = sc_means(spec, config.alpha_check, phase)
    u = counter_uniform(config.seed, NoiseStreams.BERNOULLI, np.asarray([t])[:, None], np.arange(spec.K)[None, :])[0]
    return LossVector(values=(u < means).astype(float))


def replay_loss(sequence: Union[ReplayAdversary, np.ndarray], t: int) -> LossVector:
    rows = sequence.rows if isinstance(sequence, ReplayAdversary) else np.asarray(sequence)
    if not 1 <= t <= rows.shape[0]:
        raise ReplayFileError(f"round {t} beyond replay length {rows.shape[0]}")
    return LossVector(values=rows[t - 1])


def extract_feedback(action: CombinatorialArm, loss: LossVector, mode: FeedbackMode) -> FeedbackView:
    """Bandit: only <A, l>. Semi-bandit: A o l, zeros off the played arm."""
    if action.K != loss.K:
        raise DimensionMismatchError(f"action has {action.K} coordinates, loss has {loss.K}")
    played = action.as_array() * loss.values
    if mode == FeedbackMode.BANDIT:
        return FeedbackView(mode=mode, bandit_value=float(played.sum()))
    return FeedbackView(mode=mode, bandit_value=float(played.sum()), semibandit_vector=played)
