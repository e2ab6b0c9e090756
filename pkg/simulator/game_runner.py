from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import (
    ExperimentConfig, PolicySpec, RunRecord, CombinatorialArm, LossVector,
    BatchSchedule, FeedbackMode, Granularity, SweepPoint
)
from shared.config import Config
from shared.errors import FeedbackModeError, SwitchBudgetError, DimensionMismatchError, InvalidParameterError
from simulator.adversaries import Adversary, build_adversary, extract_feedback
from simulator.batch_schedule import build_schedule
from simulator.policy_base import derive_policy_rng
from simulator.policy_registry import build_policy, policy_feedback_mode
from simulator.regret_ledger import RegretLedger, record_round, lambda_switching_regret
from simulator.statistics import final_regret_summary, fit_scaling_exponent


class GameResult:
    """One (seed, policy) cell: emitted records plus the realised play"""

    def __init__(self, seed: int, policy_id: str, records: List[RunRecord], actions: List[CombinatorialArm],
                 schedule: BatchSchedule, metadata: Dict[str, Any]):
        self.seed = seed
        self.policy_id = policy_id
        self.records = records
        self.actions = actions
        self.schedule = schedule
        self.metadata = metadata

    @property
    def final_regret(self) -> float:
        return self.records[-1].regret


class ExperimentResult:
    def __init__(self, config: ExperimentConfig, games: List[GameResult]):
        self.config = config
        self.games = games

    @property
    def records(self) -> List[RunRecord]:
        return [record for game in self.games for record in game.records]

    def metadata(self) -> Dict[str, Any]:
        policies = {}
        for game in self.games:
            policies.setdefault(game.policy_id, game.metadata)
        schedule = self.games[0].schedule
        return {
            "spec": self.config.spec.model_dump(by_alias=True),
            "adversary": {
                "kind": self.config.adversary.kind.value,
                "label": self.config.adversary.label,
                "scale": self.config.adversary.scale,
                "alpha_check": self.config.adversary.alpha_check,
                "noise_profile": self.config.adversary.noise_profile.value,
                "seed_offset": self.config.adversary.seed,
            },
            "feedback": self.config.feedback.value,
            "schedule": {
                "kind": self.config.schedule.value,
                "batch_length": schedule.batch_length,
                "batches": schedule.N,
                "nominal_batches": schedule.nominal_batches,
            },
            "seeds": list(self.config.seeds),
            "granularity": self.config.record_granularity.value,
            "policies": policies,
        }


def adversary_for_seed(config: ExperimentConfig, seed: int) -> Adversary:
    """Each replicate gets its own oblivious sequence; ADVERSARY_SEED offsets the run seed"""
    return build_adversary(config.adversary.with_changes(seed=config.adversary.seed + seed))


def check_feedback_compatibility(policy_id: str, feedback: FeedbackMode) -> None:
    if policy_feedback_mode(policy_id) == FeedbackMode.SEMIBANDIT and feedback == FeedbackMode.BANDIT:
        raise FeedbackModeError(f"semi-bandit policy '{policy_id}' cannot run under bandit feedback")


def _record(ledger: RegretLedger, seed: int, policy_id: str, adversary_id: str, t: int, I: int) -> RunRecord:
    return RunRecord(
        seed=seed,
        policy_id=policy_id,
        adversary_id=adversary_id,
        t=t,
        cum_play_loss=ledger.cum_play_loss,
        cum_switch_cost=ledger.cum_switch_cost,
        regret=lambda_switching_regret(ledger, I),
        switches_so_far=ledger.switches,
    )


def check_switch_budget(ledger: RegretLedger, schedule: BatchSchedule, I: int, intra_batch_switches: float) -> None:
    """At most I switched base arms per batch and none inside a batch"""
    if intra_batch_switches != 0.0:
        raise SwitchBudgetError(f"{intra_batch_switches} switches occurred inside batches")
    if ledger.switches > I * schedule.N + 1e-9:
        raise SwitchBudgetError(f"{ledger.switches} switches exceed the budget I*N = {I * schedule.N}")


def play_game(config: ExperimentConfig, seed: int, policy: PolicySpec,
              adversary: Optional[Adversary] = None) -> GameResult:
    spec = config.spec
    check_feedback_compatibility(policy.policy_id, config.feedback)
    schedule = build_schedule(spec, config.schedule, config.fixed_batch)
    adversary = adversary or adversary_for_seed(config, seed)
    losses = adversary.loss_matrix()
    learner = build_policy(policy, spec, schedule)
    rng = derive_policy_rng(seed, policy.policy_id)
    ledger = RegretLedger(spec.K)
    records: List[RunRecord] = []
    actions: List[CombinatorialArm] = []
    intra_batch_switches = 0.0

    for start, length in zip(schedule.starts, schedule.lengths):
        arm = learner.select(rng).check_size(spec.I)
        actions.append(arm)
        block = losses[start:start + length]
        batch_loss = LossVector(values=block.sum(axis=0), hi=float(length))

        if config.record_granularity == Granularity.ROUND:
            for offset, row in enumerate(block):
                before = ledger.switches
                record_round(ledger, arm, LossVector(values=row), spec.lam)
                if offset > 0:
                    intra_batch_switches += ledger.switches - before
                records.append(_record(ledger, seed, policy.policy_id, adversary.label, start + offset + 1, spec.I))
        else:
            record_round(ledger, arm, batch_loss, spec.lam)
            records.append(_record(ledger, seed, policy.policy_id, adversary.label, start + length, spec.I))

        learner.observe(arm, extract_feedback(arm, batch_loss, config.feedback))

    check_switch_budget(ledger, schedule, spec.I, intra_batch_switches)
    logger.info(
        f"seed={seed} policy={policy.policy_id} adversary={adversary.label}: "
        f"regret={records[-1].regret:.6g}, switches={ledger.switches:g}"
    )
    return GameResult(seed, policy.policy_id, records, actions, schedule, learner.metadata())


def run_game(config: ExperimentConfig, seed: int, policy_id: str) -> List[RunRecord]:
    """Records of one (seed, policy) cell at the configured granularity"""
    policy = next((p for p in config.policies if p.policy_id == policy_id), PolicySpec(policy_id=policy_id))
    return play_game(config, seed, policy).records


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Fan (seed x policy) cells out over a thread pool; results come back in (seed, policy) order"""
    for policy in config.policies:
        check_feedback_compatibility(policy.policy_id, config.feedback)
    workers = Config.get_thread_count(threads)
    cells: List[Tuple[int, int]] = [(s, p) for s in range(len(config.seeds)) for p in range(len(config.policies))]
    logger.info(
        f"Starting experiment: K={config.spec.K}, I={config.spec.I}, T={config.spec.T}, "
        f"lambda={config.spec.lam:g}, adversary={config.adversary.label}, "
        f"policies={[p.policy_id for p in config.policies]}, seeds={len(config.seeds)}, threads={workers}"
    )

    def run_cell(cell: Tuple[int, int]) -> GameResult:
        seed_index, policy_index = cell
        return play_game(config, config.seeds[seed_index], config.policies[policy_index])

    results: Dict[Tuple[int, int], GameResult] = {}
    if workers == 1:
        for cell in cells:
            results[cell] = run_cell(cell)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, cell): cell for cell in cells}
            for future in as_completed(futures):
                cell = futures[future]
                try:
                    results[cell] = future.result()
                except Exception as e:
                    logger.error(f"Cell seed={config.seeds[cell[0]]} policy={config.policies[cell[1]].policy_id} failed: {e}")
                    raise
    return ExperimentResult(config, [results[cell] for cell in cells])


def check_regret_column(records: List[RunRecord], loss_matrix: np.ndarray, actions: List[CombinatorialArm],
                        schedule: BatchSchedule, I: int, lam: float) -> float:
    """Largest deviation between the regret column and a per-round recomputation"""
    ledger = RegretLedger(loss_matrix.shape[1])
    expected: Dict[int, float] = {}
    for arm, start, length in zip(actions, schedule.starts, schedule.lengths):
        for t in range(start, start + length):
            record_round(ledger, arm, LossVector(values=loss_matrix[t]), lam)
            expected[t + 1] = lambda_switching_regret(ledger, I)
    deviation = 0.0
    for record in records:
        if record.t not in expected:
            raise DimensionMismatchError(f"record at t={record.t} lies outside the horizon")
        deviation = max(deviation, abs(record.regret - expected[record.t]))
    return deviation


SWEEPABLE = ("I", "lambda", "K", "T")


def sweep_config(base: ExperimentConfig, vary: str, value: float) -> ExperimentConfig:
    """The base experiment with one problem parameter replaced"""
    if vary == "lambda":
        spec = base.spec.with_changes(lam=float(value))
    elif vary in ("I", "K", "T"):
        spec = base.spec.with_changes(**{vary: int(value)})
    else:
        raise InvalidParameterError(f"cannot sweep '{vary}'; choose one of {', '.join(SWEEPABLE)}")
    return base.with_spec(spec)


def run_sweep(base: ExperimentConfig, vary: str, values: List[float],
              threads: Optional[int] = None) -> Tuple[List[SweepPoint], List[ExperimentResult]]:
    points: List[SweepPoint] = []
    results: List[ExperimentResult] = []
    for value in values:
        result = run_experiment(sweep_config(base, vary, value), threads)
        results.append(result)
        for policy_id, (mean, se, _) in final_regret_summary(result.records).items():
            points.append(SweepPoint(vary=vary, value=float(value), policy_id=policy_id,
                                     mean_regret=mean, se_regret=se))
    return points, results


def sweep_exponents(points: List[SweepPoint]) -> Dict[str, Tuple[float, float]]:
    """policy -> (exponent, r^2) of final regret against the swept parameter"""
    by_policy: Dict[str, List[Tuple[float, float]]] = {}
    for point in points:
        by_policy.setdefault(point.policy_id, []).append((point.value, point.mean_regret))
    exponents = {}
    for policy_id, sweep in by_policy.items():
        if len(sweep) < 3:
            logger.warning(f"Sweep for {policy_id} has {len(sweep)} points; exponent not fitted")
            continue
        exponents[policy_id] = fit_scaling_exponent(sweep)
        logger.info(f"{policy_id}: regret ~ x^{exponents[policy_id][0]:.3f} (r^2={exponents[policy_id][1]:.3f})")
    return exponents
