import zlib
from typing import Any, Dict
import numpy as np
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import ProblemSpec, BatchSchedule, CombinatorialArm, FeedbackMode, FeedbackView
from shared.errors import FeedbackModeError


class Policy:
    """Batched learner: one select() per batch, one observe() with the batch feedback"""
    policy_id: str = "policy"
    feedback_mode: FeedbackMode = FeedbackMode.BANDIT

    def __init__(self, spec: ProblemSpec, schedule: BatchSchedule):
        self.spec = spec
        self.schedule = schedule

    def select(self, rng: np.random.Generator) -> CombinatorialArm:
        raise NotImplementedError

    def observe(self, arm: CombinatorialArm, feedback: FeedbackView) -> None:
        raise NotImplementedError

    def metadata(self) -> Dict[str, Any]:
        return {"policy_id": self.policy_id, "feedback_mode": self.feedback_mode.value}

    def _require_semibandit(self, feedback: FeedbackView) -> np.ndarray:
        if feedback.semibandit_vector is None:
            raise FeedbackModeError(f"{self.policy_id} needs semi-bandit feedback, got {feedback.mode.value}")
        return feedback.semibandit_vector


def derive_policy_rng(seed: int, policy_id: str) -> np.random.Generator:
    """Independent generator per (seed, policy); unaffected by the other cells of a run"""
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(policy_id.encode("utf-8"))]
    return np.random.default_rng(np.random.SeedSequence(entropy))
