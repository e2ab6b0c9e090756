from typing import Any, Callable, Dict, List
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ProblemSpec, BatchSchedule, PolicySpec, FeedbackMode
from shared.config import PolicyIds
from shared.errors import ConfigError
from simulator.policy_base import Policy
from simulator.bandit_policies import BatchedExp2, BatchedExp3
from simulator.semibandit_policies import BatchedBroad, BatchedHybrid, BatchedNegEntropy


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


POLICIES: Dict[str, type] = {
    PolicyIds.EXP2: BatchedExp2,
    PolicyIds.EXP3: BatchedExp3,
    PolicyIds.BROAD: BatchedBroad,
    PolicyIds.HYBRID: BatchedHybrid,
    PolicyIds.NEGENTROPY: BatchedNegEntropy,
}

# Accepted overrides and their coercions
OVERRIDES: Dict[str, Dict[str, Callable[[Any], Any]]] = {
    PolicyIds.EXP2: {"eta": float, "gamma": float},
    PolicyIds.EXP3: {"eta": float, "gamma": float},
    PolicyIds.BROAD: {"eta0": float, "reset_iterate": _as_bool, "threshold_eta": str},
    PolicyIds.HYBRID: {"eta_scale": float},
    PolicyIds.NEGENTROPY: {"eta_scale": float},
}


def known_policies() -> List[str]:
    return list(POLICIES)


def policy_feedback_mode(policy_id: str) -> FeedbackMode:
    if policy_id not in POLICIES:
        raise ConfigError(f"unknown policy '{policy_id}' (known: {', '.join(POLICIES)})")
    return POLICIES[policy_id].feedback_mode


def coerce_overrides(policy_id: str, overrides: Dict[str, Any]) -> Dict[str, Any]:
    accepted = OVERRIDES[policy_id]
    coerced = {}
    for key, value in overrides.items():
        if key not in accepted:
            raise ConfigError(f"policy '{policy_id}' does not accept override '{key}'")
        try:
            coerced[key] = accepted[key](value)
        except ValueError as e:
            raise ConfigError(f"policy '{policy_id}' override '{key}': {e}") from e
    return coerced


def build_policy(policy: PolicySpec, spec: ProblemSpec, schedule: BatchSchedule) -> Policy:
    policy_feedback_mode(policy.policy_id)
    kwargs = coerce_overrides(policy.policy_id, policy.overrides)
    return POLICIES[policy.policy_id](spec, schedule, **kwargs)
