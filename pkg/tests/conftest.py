import os
import sys
from typing import Callable, List, Optional

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared.models import (
    ProblemSpec, AdversaryConfig, ExperimentConfig, PolicySpec, HullPoint,
    ScheduleKind, FeedbackMode, Granularity
)


def _cap_to_hull(a: np.ndarray, I: int) -> np.ndarray:
    """Push mass above 1 onto the uncapped coordinates until the point is feasible"""
    for _ in range(a.size):
        over = a > 1.0
        if not over.any():
            break
        excess = float((a[over] - 1.0).sum())
        a[over] = 1.0
        free = a < 1.0
        a[free] += excess * a[free] / a[free].sum()
    a = np.minimum(a, 1.0)
    free = a < 1.0
    if free.any():
        a[free] *= (I - (~free).sum()) / a[free].sum()
    return a


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def hull_point_factory() -> Callable[..., HullPoint]:
    """Random points of the capped simplex; interior=True keeps every coordinate >= I/(2K)"""

    def make(rng: np.random.Generator, K: int, I: int, interior: bool = False) -> HullPoint:
        if I == K:
            return HullPoint(a=np.ones(K), I=I)
        a = _cap_to_hull(rng.dirichlet(np.ones(K)) * I, I)
        if interior:
            a = 0.5 * a + 0.5 * I / K
        return HullPoint(a=a, I=I)

    return make


@pytest.fixture
def replay_file(tmp_path) -> Callable[[np.ndarray, str], str]:
    def write(rows: np.ndarray, name: str = "losses.csv") -> str:
        path = tmp_path / name
        np.savetxt(path, np.atleast_2d(rows), delimiter=",", fmt="%.17g")
        return str(path)

    return write


@pytest.fixture
def experiment_factory() -> Callable[..., ExperimentConfig]:
    def make(K: int = 5, I: int = 2, T: int = 200, lam: float = 1.0, kind: str = "cin",
             policies: Optional[List[str]] = None, feedback: str = "bandit", seeds: Optional[List[int]] = None,
             schedule: ScheduleKind = ScheduleKind.FIXED, fixed_batch: Optional[int] = 10,
             granularity: Granularity = Granularity.BATCH, replay_path: Optional[str] = None,
             alpha_check: Optional[float] = None, scale: float = 1.0) -> ExperimentConfig:
        spec = ProblemSpec(K=K, I=I, T=T, lam=lam)
        adversary = AdversaryConfig(kind=kind, spec=spec, replay_path=replay_path,
                                    alpha_check=alpha_check, scale=scale)
        return ExperimentConfig(
            spec=spec,
            adversary=adversary,
            policies=[PolicySpec(policy_id=p) for p in (policies or ["exp2"])],
            schedule=schedule,
            fixed_batch=fixed_batch,
            feedback=FeedbackMode(feedback),
            seeds=seeds or [0, 1],
            output_path="unused.csv",
            record_granularity=granularity,
        )

    return make
