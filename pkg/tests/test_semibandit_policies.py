import math

import numpy as np
import pytest
from scipy.optimize import brentq

from shared.models import ProblemSpec, CombinatorialArm, HullPoint, FeedbackMode, FeedbackView
from shared.errors import EstimatorError, ProjectionError, InvalidParameterError, FeedbackModeError
from simulator.batch_schedule import batch_schedule_broad, schedule_from_length
from simulator.capped_simplex import LogBarrier, decompose_hull_point, is_feasible
from simulator.semibandit_policies import (
    BroadState, barrier_minimizer, omd_step, bregman_project, importance_weighted_estimate, broad_update,
    broad_parameters, BaselineState, hybrid_baseline_step, negentropy_baseline_step,
    BatchedBroad, BatchedHybrid, BatchedNegEntropy, THRESHOLD_CURRENT
)
from simulator.capped_simplex import NegEntropy, Hybrid
from simulator.policy_base import derive_policy_rng


def omd_oracle(a_prime, estimate, eta, I):
    """Independent solve of the log-barrier OMD step by root-finding in the multiplier"""

    def point(mu):
        d = 1.0 / a_prime + eta * (estimate + mu)
        return np.where(d <= 1.0, 1.0, 1.0 / np.where(d <= 1.0, 1.0, d))

    K = a_prime.size
    mu_lo = np.min((1.0 - 1.0 / a_prime) / eta - estimate)
    mu_hi = np.max((K / I - 1.0 / a_prime) / eta - estimate)
    mu = brentq(lambda m: point(m).sum() - I, mu_lo, mu_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return point(mu)


def semi_view(vector):
    vector = np.asarray(vector, dtype=float)
    return FeedbackView(mode=FeedbackMode.SEMIBANDIT, bandit_value=float(vector.sum()), semibandit_vector=vector)


class TestOmdStep:
    def test_matches_independent_oracle(self, rng, hull_point_factory):
        for _ in range(1000):
            K = int(rng.integers(2, 33))
            I = int(rng.integers(1, K))
            state = BroadState(K, I, T=1000, eta0=float(rng.uniform(0.01, 1.0)))
            state.a_prime = hull_point_factory(rng, K, I, interior=True).a.copy()
            estimate = np.zeros(K)
            played = rng.choice(K, size=I, replace=False)
            estimate[played] = rng.uniform(0, 1, size=I) / state.a_prime[played]
            ours = omd_step(state, estimate).a
            oracle = omd_oracle(state.a_prime, estimate, state.eta, I)
            np.testing.assert_allclose(ours, oracle, atol=1e-7)

    def test_zero_estimate_keeps_iterate(self, rng, hull_point_factory):
        state = BroadState(6, 2, T=100, eta0=0.1)
        state.a_prime = hull_point_factory(rng, 6, 2, interior=True).a.copy()
        np.testing.assert_allclose(omd_step(state, np.zeros(6)).a, state.a_prime, atol=1e-12)

    def test_beats_feasible_competitors(self, rng, hull_point_factory):
        barrier = LogBarrier()
        K, I = 7, 3
        state = BroadState(K, I, T=100, eta0=0.5)
        state.a_prime = hull_point_factory(rng, K, I, interior=True).a.copy()
        estimate = rng.uniform(0, 3, size=K)

        def objective(a):
            return state.eta * estimate @ a + barrier.value(a) - barrier.value(state.a_prime) \
                - barrier.grad(state.a_prime) @ (a - state.a_prime)

        best = objective(omd_step(state, estimate).a)
        for _ in range(200):
            assert best <= objective(hull_point_factory(rng, K, I, interior=True).a) + 1e-10

    def test_non_finite_estimate(self):
        with pytest.raises(EstimatorError):
            omd_step(BroadState(4, 2, T=10, eta0=0.1), np.array([0.0, np.inf, 0.0, 0.0]))


class TestBregmanProjection:
    def test_feasible_point_is_fixed(self):
        state = BroadState(4, 2, T=10, eta0=0.1)
        point = np.array([0.9, 0.6, 0.3, 0.2])
        np.testing.assert_allclose(bregman_project(state, point).a, point)

    def test_infeasible_sum_projected(self):
        state = BroadState(5, 2, T=10, eta0=0.1)
        projected = bregman_project(state, np.array([0.5, 0.5, 0.5, 0.5, 0.5]))
        assert is_feasible(projected.a, 2)
        np.testing.assert_allclose(projected.a, 0.4, atol=1e-12)

    def test_coordinate_above_one_rejected(self):
        with pytest.raises(ProjectionError):
            bregman_project(BroadState(3, 1, T=10, eta0=0.1), np.array([1.5, 0.1, 0.1]))


class TestEstimator:
    def test_importance_weights(self):
        estimate = importance_weighted_estimate(
            CombinatorialArm(bits=(1, 0, 1)), np.array([0.4, 0.0, 0.9]), HullPoint(a=[0.8, 0.7, 0.5], I=2)
        )
        np.testing.assert_allclose(estimate, [0.5, 0.0, 1.8])

    def test_unbiased_over_decomposition(self, rng, hull_point_factory):
        for _ in range(1000):
            K = int(rng.integers(2, 17))
            I = int(rng.integers(1, K + 1))
            point = hull_point_factory(rng, K, I, interior=True)
            loss = rng.uniform(size=K)
            decomposition = decompose_hull_point(point)
            expectation = sum(
                w * importance_weighted_estimate(v, v.as_array() * loss, point)
                for w, v in zip(decomposition.weights, decomposition.vertices)
            )
            np.testing.assert_allclose(expectation, loss, atol=1e-9)


class TestBroadState:
    def test_parameters(self):
        spec = ProblemSpec(K=10, I=3, T=10_000, lam=1.0)
        assert broad_parameters(spec, batch_schedule_broad(spec)) == pytest.approx(1 / (18 * 3 * 225))
        assert broad_parameters(spec, schedule_from_length(100, 1)) == pytest.approx(1 / 81)

    def test_barrier_minimizer(self):
        np.testing.assert_allclose(barrier_minimizer(8, 2).a, 0.25)

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidParameterError):
            BroadState(4, 2, T=10, eta0=0.0)
        with pytest.raises(InvalidParameterError):
            BroadState(4, 2, T=10, eta0=0.1, threshold_eta="sometimes")

    def test_epoch_halves_rate_and_resets(self):
        state = BroadState(4, 2, T=3, eta0=1.0)
        assert state.threshold == pytest.approx(4 * math.log(3) / 3)
        a_n = bregman_project(state)
        broad_update(state, CombinatorialArm(bits=(1, 1, 0, 0)), np.array([1.0, 1.0, 0.0, 0.0]), a_n)
        assert state.eta == 0.5
        assert state.epochs == 1
        assert state.epoch_boundaries == [1]
        assert state.epoch_start == 1
        assert state.epoch_accumulator == 0.0
        np.testing.assert_allclose(state.a_prime, 0.5)

    def test_epoch_without_reset_keeps_iterate(self):
        state = BroadState(4, 2, T=3, eta0=1.0, reset_iterate=False)
        a_n = bregman_project(state)
        broad_update(state, CombinatorialArm(bits=(1, 1, 0, 0)), np.array([1.0, 1.0, 0.0, 0.0]), a_n)
        assert state.epochs == 1
        assert state.a_prime[0] < 0.5 < state.a_prime[3]

    def test_current_rate_threshold_grows(self):
        state = BroadState(4, 2, T=3, eta0=1.0, threshold_eta=THRESHOLD_CURRENT)
        before = state.threshold
        state.eta = 0.5
        assert state.threshold == pytest.approx(4 * before)

    def test_below_threshold_accumulates(self):
        state = BroadState(4, 2, T=1000, eta0=0.01)
        a_n = bregman_project(state)
        broad_update(state, CombinatorialArm(bits=(0, 1, 1, 0)), np.array([0.0, 0.5, 0.5, 0.0]), a_n)
        assert state.epochs == 0
        assert state.epoch_accumulator == pytest.approx(0.5)
        assert state.batch_index == 1


class TestBaselines:
    def test_negentropy_ftrl_closed_form(self):
        state = BaselineState(NegEntropy(), 2, 1)
        state.cumulative_estimate = np.array([math.log(2), 0.0])
        np.testing.assert_allclose(state._solve().a, [1 / 3, 2 / 3], atol=1e-10)

    def test_learning_rate_decays(self):
        state = BaselineState(Hybrid(gamma=1.0), 5, 2, eta_scale=2.0)
        assert state.eta == 2.0
        state.batch_index = 1
        assert state.eta == 2.0
        state.batch_index = 4
        assert state.eta == pytest.approx(1.0)

    def test_iterate_after_first_batch_uses_unit_rate(self):
        state = BaselineState(NegEntropy(), 2, 1)
        state.cumulative_estimate = np.array([math.log(2), 0.0])
        state.batch_index = 1
        assert state.eta == 1.0
        np.testing.assert_allclose(state._solve().a, [1 / 3, 2 / 3], atol=1e-10)

    def test_first_step_matches_closed_form(self):
        # one batch with loss ln2 on arm 0 while a = (1/2, 1/2): estimate is 2 ln2
        state = BaselineState(NegEntropy(), 2, 1)
        np.testing.assert_allclose(state.a.a, 0.5, atol=1e-12)
        negentropy_baseline_step(state, CombinatorialArm(bits=(1, 0)), np.array([math.log(2), 0.0]))
        np.testing.assert_allclose(state.a.a, [0.2, 0.8], atol=1e-10)

    @pytest.mark.parametrize("step,reg", [(hybrid_baseline_step, NegEntropy()),
                                          (negentropy_baseline_step, Hybrid(gamma=1.0))])
    def test_step_rejects_other_regularizer(self, step, reg):
        state = BaselineState(reg, 4, 2)
        with pytest.raises(InvalidParameterError):
            step(state, CombinatorialArm(bits=(1, 1, 0, 0)), np.zeros(4))

    @pytest.mark.parametrize("step,reg", [(hybrid_baseline_step, Hybrid(gamma=1.0)),
                                          (negentropy_baseline_step, NegEntropy())])
    def test_step_moves_mass_off_lossy_arm(self, step, reg):
        state = BaselineState(reg, 4, 2)
        np.testing.assert_allclose(state.a.a, 0.5, atol=1e-9)
        step(state, CombinatorialArm(bits=(1, 1, 0, 0)), np.array([1.0, 0.0, 0.0, 0.0]))
        assert state.batch_index == 1
        assert state.a.a[0] < 0.5
        assert is_feasible(state.a.a, 2)


class TestPolicies:
    @pytest.mark.parametrize("cls", [BatchedBroad, BatchedHybrid, BatchedNegEntropy])
    def test_plays_valid_arms(self, cls, rng):
        spec = ProblemSpec(K=6, I=2, T=100, lam=1.0)
        policy = cls(spec, schedule_from_length(100, 5))
        policy_rng = derive_policy_rng(0, policy.policy_id)
        for _ in range(20):
            arm = policy.select(policy_rng)
            assert arm.size == 2
            policy.observe(arm, semi_view(arm.as_array() * rng.uniform(0, 5, size=6)))
        assert policy.metadata()["feedback_mode"] == "semibandit"

    @pytest.mark.parametrize("cls", [BatchedBroad, BatchedHybrid, BatchedNegEntropy])
    def test_bandit_feedback_rejected(self, cls):
        spec = ProblemSpec(K=4, I=2, T=10, lam=1.0)
        policy = cls(spec, schedule_from_length(10, 2))
        arm = policy.select(derive_policy_rng(0, policy.policy_id))
        with pytest.raises(FeedbackModeError):
            policy.observe(arm, FeedbackView(mode=FeedbackMode.BANDIT, bandit_value=1.0))

    def test_broad_metadata_records_epochs(self):
        spec = ProblemSpec(K=4, I=2, T=3, lam=1.0)
        policy = BatchedBroad(spec, schedule_from_length(3, 1), eta0=1.0)
        arm = policy.select(derive_policy_rng(0, policy.policy_id))
        policy.observe(arm, semi_view(arm.as_array()))
        assert policy.metadata()["epoch_boundaries"] == [1]
