import math
from typing import Optional
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ProblemSpec, BatchSchedule, ScheduleKind, FeedbackMode
from shared.config import Config
from shared.errors import InvalidParameterError


def _snap(value: float) -> float:
    """Snap values within the rounding guard of an integer onto that integer"""
    nearest = round(value)
    if abs(value - nearest) <= Config.ROUNDING_GUARD * max(1.0, abs(value)):
        return float(nearest)
    return value


def guarded_ceil(value: float) -> int:
    return int(math.ceil(_snap(value)))


def guarded_floor(value: float) -> int:
    return int(math.floor(_snap(value)))


def schedule_from_length(T: int, B: int) -> BatchSchedule:
    """N - 1 batches of length B and a final batch of T - (N - 1)B, N = floor(T/B) + 1.

    An empty final batch (B divides T) is dropped; nominal_batches keeps the
    undropped N used by the parameter formulas."""
    if B < 1:
        logger.warning(f"Batch length {B} below 1, clamping to per-round play")
        B = 1
    nominal = T // B + 1
    lengths = [B] * (nominal - 1)
    last = T - (nominal - 1) * B
    if last > 0:
        lengths.append(last)
    return BatchSchedule(lengths=tuple(lengths), batch_length=B, nominal_batches=nominal)


def batch_schedule_exp2(spec: ProblemSpec) -> BatchSchedule:
    """B = ceil(lambda^(2/3) K^(-1/3) T^(1/3) I^(-1/3))"""
    raw = spec.lam ** (2.0 / 3.0) * spec.K ** (-1.0 / 3.0) * spec.T ** (1.0 / 3.0) * spec.I ** (-1.0 / 3.0)
    return schedule_from_length(spec.T, guarded_ceil(raw))


def batch_schedule_broad(spec: ProblemSpec) -> BatchSchedule:
    """B = floor((TI)^(1/3) lambda^(2/3) K^(-1/3) + 1)"""
    raw = (spec.T * spec.I) ** (1.0 / 3.0) * spec.lam ** (2.0 / 3.0) * spec.K ** (-1.0 / 3.0) + 1.0
    return schedule_from_length(spec.T, guarded_floor(raw))


def batch_schedule_experiment(spec: ProblemSpec, feedback: FeedbackMode) -> BatchSchedule:
    """Batch lengths used in the published experiments.

    bandit:      B = ceil(3 lambda^(2/3) K^(-1/3) (TI)^(1/3))
    semi-bandit: B = ceil(3 lambda^(2/3) K^(-1/3) T^(1/3) I^(2/3))
    """
    base = 3.0 * spec.lam ** (2.0 / 3.0) * spec.K ** (-1.0 / 3.0) * spec.T ** (1.0 / 3.0)
    if feedback == FeedbackMode.BANDIT:
        raw = base * spec.I ** (1.0 / 3.0)
    else:
        raw = base * spec.I ** (2.0 / 3.0)
    return schedule_from_length(spec.T, guarded_ceil(raw))


def build_schedule(spec: ProblemSpec, kind: ScheduleKind, fixed_batch: Optional[int] = None) -> BatchSchedule:
    if kind == ScheduleKind.THEOREM_EXP2:
        return batch_schedule_exp2(spec)
    if kind == ScheduleKind.THEOREM_BROAD:
        return batch_schedule_broad(spec)
    if kind == ScheduleKind.EXPERIMENT_BANDIT:
        return batch_schedule_experiment(spec, FeedbackMode.BANDIT)
    if kind == ScheduleKind.EXPERIMENT_SEMIBANDIT:
        return batch_schedule_experiment(spec, FeedbackMode.SEMIBANDIT)
    if kind == ScheduleKind.FIXED:
        if fixed_batch is None:
            raise InvalidParameterError("fixed schedule requires a batch length")
        return schedule_from_length(spec.T, fixed_batch)
    raise InvalidParameterError(f"unknown schedule kind {kind}")
