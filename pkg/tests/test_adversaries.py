import math

import numpy as np
import pytest

from shared.models import (
    AdversaryConfig, AdversaryKind, NoiseProfile, ProblemSpec, CombinatorialArm, LossVector, FeedbackMode
)
from shared.errors import AdversaryConfigError, ReplayFileError, DimensionMismatchError
from simulator.adversaries import (
    build_adversary, cin_parameters, cdn_parameters, cin_loss, cdn_loss, sc_loss, replay_loss,
    draw_hidden_arm, sc_phase_lengths, sc_phase_boundaries, sc_means, extract_feedback,
    validate_replay_file, load_replay_file
)

PAPER_SPEC = ProblemSpec(K=10, I=3, T=10_000, lam=1.0)


def config(kind, spec=PAPER_SPEC, **kwargs):
    return AdversaryConfig(kind=kind, spec=spec, **kwargs)


class TestNoiseParameters:
    def test_cin_experiment_values(self):
        eps, sigma = cin_parameters(PAPER_SPEC, scale=10, profile=NoiseProfile.EXPERIMENT)
        assert eps == pytest.approx(0.0057978, rel=1e-4)
        assert sigma == pytest.approx(10 / (9 * math.log2(10_000)), rel=1e-12)

    def test_cdn_experiment_values(self):
        eps, sigma = cdn_parameters(PAPER_SPEC, scale=10, profile=NoiseProfile.EXPERIMENT)
        assert eps == pytest.approx(0.00402, rel=1e-3)
        assert sigma == pytest.approx(0.083624, rel=1e-4)

    def test_cin_theorem_sigma(self):
        eps, sigma = cin_parameters(PAPER_SPEC)
        log_t = math.log2(10_000)
        expected = 1 / (6 * math.sqrt(log_t * math.log2(4 * 10_000 * (1 + eps) / eps)))
        assert sigma == pytest.approx(expected, rel=1e-12)

    def test_scale_multiplies_both(self):
        base = cdn_parameters(PAPER_SPEC)
        scaled = cdn_parameters(PAPER_SPEC, scale=3)
        np.testing.assert_allclose(scaled, np.array(base) * 3, rtol=1e-12)

    def test_short_horizon_rejected(self):
        with pytest.raises(AdversaryConfigError):
            cin_parameters(ProblemSpec(K=4, I=2, T=1, lam=1.0))

    def test_zero_lambda_rejected_for_cin(self):
        with pytest.raises(AdversaryConfigError):
            cin_parameters(PAPER_SPEC.with_changes(lam=0.0))

    def test_saturating_epsilon_rejected(self):
        with pytest.raises(AdversaryConfigError):
            cin_parameters(ProblemSpec(K=50, I=1, T=4, lam=10.0), scale=10)


class TestGaussianTreeAdversaries:
    def test_hidden_arm_is_valid(self):
        chi = draw_hidden_arm(PAPER_SPEC, seed=12)
        assert chi.K == 10 and chi.size == 3
        assert draw_hidden_arm(PAPER_SPEC, seed=12) == chi

    def test_hidden_arm_roughly_uniform(self):
        counts = np.zeros(10)
        for seed in range(3000):
            counts += draw_hidden_arm(PAPER_SPEC, seed).as_array()
        np.testing.assert_allclose(counts / 3000, 0.3, atol=0.04)

    def test_pinned_hidden_arm(self):
        chi = CombinatorialArm.from_indices(10, [0, 4, 9])
        adversary = build_adversary(config(AdversaryKind.CIN, chi=chi, seed=5))
        assert adversary.chi == chi

    @pytest.mark.parametrize("kind", [AdversaryKind.CIN, AdversaryKind.CDN])
    def test_losses_in_unit_interval(self, kind):
        adversary = build_adversary(config(kind, scale=10, noise_profile=NoiseProfile.EXPERIMENT, seed=3))
        matrix = adversary.loss_matrix()
        assert matrix.shape == (10_000, 10)
        assert matrix.min() >= 0.0 and matrix.max() <= 1.0

    def test_matrix_is_read_only(self):
        matrix = build_adversary(config(AdversaryKind.CIN, seed=1)).loss_matrix()
        with pytest.raises(ValueError):
            matrix[0, 0] = 0.0

    def test_cin_coordinates_differ_only_by_epsilon_chi(self):
        adversary = build_adversary(config(AdversaryKind.CIN, seed=8))
        raw = adversary.unclipped_matrix()
        shifted = raw + adversary.epsilon * adversary.chi.as_array()[None, :]
        np.testing.assert_allclose(shifted, np.repeat(shifted[:, :1], 10, axis=1), atol=1e-15)

    @pytest.mark.parametrize("kind,loss_fn", [(AdversaryKind.CIN, cin_loss), (AdversaryKind.CDN, cdn_loss)])
    def test_single_round_matches_matrix(self, kind, loss_fn):
        cfg = config(kind, spec=ProblemSpec(K=5, I=2, T=300, lam=1.0), scale=10,
                     noise_profile=NoiseProfile.EXPERIMENT, seed=21)
        matrix = build_adversary(cfg).loss_matrix()
        for t in (1, 2, 77, 256, 300):
            assert np.array_equal(loss_fn(cfg, t).values, matrix[t - 1])

    def test_seed_changes_sequence(self):
        a = build_adversary(config(AdversaryKind.CDN, seed=1)).loss_matrix()
        b = build_adversary(config(AdversaryKind.CDN, seed=2)).loss_matrix()
        assert not np.array_equal(a, b)

    def test_round_outside_horizon(self):
        adversary = build_adversary(config(AdversaryKind.CIN, seed=1))
        with pytest.raises(IndexError):
            adversary.loss(0)
        with pytest.raises(IndexError):
            adversary.loss(10_001)

    def test_clipping_rare_at_theorem_scale(self):
        spec = ProblemSpec(K=10, I=3, T=4096, lam=1.0)
        clipped = []
        for seed in range(200):
            adversary = build_adversary(config(AdversaryKind.CIN, spec=spec, seed=seed))
            clipped.append(bool(adversary.clipped_mask().any()))
        eps = adversary.epsilon
        fraction = float(np.mean(clipped))
        se = math.sqrt(max(fraction * (1 - fraction), 1e-12) / 200)
        assert fraction <= eps / (4 * (1 + eps)) + 3 * se


class TestStochasticallyConstrained:
    def test_phase_lengths(self):
        assert sc_phase_lengths(6) == [1, 2, 4, 6, 10, 16]

    def test_phase_boundaries(self):
        assert sc_phase_boundaries(7) == [1, 3, 7]
        assert sc_phase_boundaries(8)[-1] >= 8

    def test_means_alternate(self):
        spec = ProblemSpec(K=4, I=1, T=10, lam=0.5)
        np.testing.assert_allclose(sc_means(spec, 1.0, 1), [0.5, 1, 1, 1])
        np.testing.assert_allclose(sc_means(spec, 1.0, 2), [0, 0.5, 0.5, 0.5])

    def test_zero_gap_is_deterministic(self):
        cfg = config(AdversaryKind.SC, spec=ProblemSpec(K=4, I=2, T=7, lam=1.0), alpha_check=0.0, seed=3)
        matrix = build_adversary(cfg).loss_matrix()
        np.testing.assert_array_equal(matrix[0], np.ones(4))
        np.testing.assert_array_equal(matrix[1:3], np.zeros((2, 4)))
        np.testing.assert_array_equal(matrix[3:7], np.ones((4, 4)))

    def test_single_round_matches_matrix(self):
        cfg = config(AdversaryKind.SC, spec=ProblemSpec(K=6, I=2, T=500, lam=1.0), alpha_check=0.3, seed=17)
        matrix = build_adversary(cfg).loss_matrix()
        for t in (1, 5, 100, 499, 500):
            assert np.array_equal(sc_loss(cfg, t).values, matrix[t - 1])

    def test_bernoulli_frequencies(self):
        cfg = config(AdversaryKind.SC, spec=ProblemSpec(K=4, I=1, T=20_000, lam=1.0), alpha_check=0.5, seed=4)
        matrix = build_adversary(cfg).loss_matrix()
        ends = sc_phase_boundaries(20_000)
        odd_rows = np.concatenate([np.arange(s, min(e, 20_000)) for s, e in zip([0] + ends[1::2], ends[::2])])
        assert matrix[odd_rows, 0].mean() == pytest.approx(0.5, abs=0.03)
        assert matrix[odd_rows, 1:].min() == 1.0

    def test_requires_alpha_check(self):
        with pytest.raises(ValueError):
            config(AdversaryKind.SC)

    def test_label(self):
        assert config(AdversaryKind.SC, alpha_check=0.25).label == "sc(0.25)"


class TestReplay:
    def test_replays_rows_verbatim(self, replay_file):
        rows = np.array([[0.1, 0.9, 0.5], [0.0, 1.0, 0.25]])
        path = replay_file(rows)
        adversary = build_adversary(config(AdversaryKind.REPLAY, spec=ProblemSpec(K=3, I=1, T=2, lam=1.0),
                                           replay_path=path))
        np.testing.assert_array_equal(adversary.loss_matrix(), rows)
        np.testing.assert_array_equal(replay_loss(adversary, 2).values, rows[1])

    def test_short_file_rejected(self, replay_file):
        path = replay_file(np.full((3, 2), 0.5))
        with pytest.raises(ReplayFileError):
            build_adversary(config(AdversaryKind.REPLAY, spec=ProblemSpec(K=2, I=1, T=4, lam=1.0), replay_path=path))

    def test_round_past_end(self):
        with pytest.raises(ReplayFileError):
            replay_loss(np.full((3, 2), 0.5), 4)

    def test_wrong_width(self, replay_file):
        with pytest.raises(ReplayFileError):
            load_replay_file(replay_file(np.full((3, 2), 0.5)), K=3)

    def test_out_of_range_values(self, replay_file):
        with pytest.raises(ReplayFileError):
            load_replay_file(replay_file(np.array([[0.5, 1.5]])))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ReplayFileError):
            load_replay_file(str(tmp_path / "nope.csv"))

    def test_validate_summary(self, replay_file):
        summary = validate_replay_file(replay_file(np.array([[0.2, 0.4], [0.6, 0.8], [0.0, 1.0]])), K=2)
        assert summary == {"rows": 3, "columns": 2, "min": 0.0, "max": 1.0}


class TestFeedback:
    def test_bandit_reveals_only_total(self):
        view = extract_feedback(CombinatorialArm(bits=(1, 0, 1)), LossVector(values=(0.2, 0.9, 0.3)),
                                FeedbackMode.BANDIT)
        assert view.bandit_value == pytest.approx(0.5)
        assert view.semibandit_vector is None

    def test_semibandit_masks_unplayed(self):
        view = extract_feedback(CombinatorialArm(bits=(1, 0, 1)), LossVector(values=(0.2, 0.9, 0.3)),
                                FeedbackMode.SEMIBANDIT)
        np.testing.assert_allclose(view.semibandit_vector, [0.2, 0.0, 0.3])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            extract_feedback(CombinatorialArm(bits=(1, 0)), LossVector(values=(0.2, 0.9, 0.3)),
                             FeedbackMode.BANDIT)
