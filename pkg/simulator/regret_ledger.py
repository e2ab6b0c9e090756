import math
from typing import Optional, Tuple
import numpy as np
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import CombinatorialArm, LossVector
from shared.errors import DimensionMismatchError, EmptyLedgerError


def switch_distance(a: CombinatorialArm, b_or_zero: Optional[CombinatorialArm] = None) -> float:
    """Number of base arms switched: half the Hamming distance, or |a| against A_0 = 0"""
    if b_or_zero is None:
        return float(a.size)
    if a.K != b_or_zero.K:
        raise DimensionMismatchError(f"arms have {a.K} and {b_or_zero.K} coordinates")
    differing = sum(1 for x, y in zip(a.bits, b_or_zero.bits) if x != y)
    return 0.5 * differing


class RegretLedger:
    """Running totals for lambda-switching regret. Single writer per run."""

    def __init__(self, K: int):
        self.K = K
        self.cum_play_loss: float = 0.0
        self.cum_switch_cost: float = 0.0
        self.switches: float = 0.0
        self.per_arm_cum_loss: np.ndarray = np.zeros(K)
        self.prev_arm: Optional[CombinatorialArm] = None
        self.rounds_recorded: int = 0

    @property
    def is_empty(self) -> bool:
        return self.rounds_recorded == 0


def record_round(ledger: RegretLedger, action: CombinatorialArm, loss: LossVector, lam: float) -> RegretLedger:
    """Accumulate <A_t, l_t> + lambda * d(A_t, A_{t-1}) and the full loss vector"""
    if action.K != ledger.K or loss.K != ledger.K:
        raise DimensionMismatchError(
            f"ledger has K={ledger.K}, action has {action.K}, loss has {loss.K}"
        )
    moved = switch_distance(action, ledger.prev_arm)
    ledger.cum_play_loss += float(action.as_array() @ loss.values)
    ledger.cum_switch_cost += lam * moved
    ledger.switches += moved
    ledger.per_arm_cum_loss += loss.values
    ledger.prev_arm = action
    ledger.rounds_recorded += 1
    return ledger


def hindsight_best(ledger: RegretLedger, I: int) -> Tuple[CombinatorialArm, float]:
    """Best fixed arm in hindsight. The action set is a uniform matroid, so the
    minimum picks the I smallest cumulative losses (lowest index on ties)."""
    if ledger.is_empty:
        raise EmptyLedgerError("hindsight comparator needs at least one recorded round")
    order = np.argsort(ledger.per_arm_cum_loss, kind="stable")[:I]
    chosen = np.sort(order)
    arm = CombinatorialArm.from_indices(ledger.K, chosen)
    return arm, float(ledger.per_arm_cum_loss[chosen].sum())


def lambda_switching_regret(ledger: RegretLedger, I: int) -> float:
    _, best = hindsight_best(ledger, I)
    return ledger.cum_play_loss + ledger.cum_switch_cost - best


def is_half_integer(value: float, tol: float = 1e-12) -> bool:
    return math.isclose(2.0 * value, round(2.0 * value), abs_tol=tol)


def ledger_snapshot(ledger: RegretLedger, I: int) -> dict:
    """Plain-dict summary for logging"""
    regret = lambda_switching_regret(ledger, I)
    logger.debug(f"Ledger after {ledger.rounds_recorded} records: regret={regret:.6g}")
    return {
        "rounds": ledger.rounds_recorded,
        "cum_play_loss": ledger.cum_play_loss,
        "cum_switch_cost": ledger.cum_switch_cost,
        "switches": ledger.switches,
        "regret": regret,
    }
