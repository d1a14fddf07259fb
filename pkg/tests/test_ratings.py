import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import screening_bruteforce
from vqstudy.ratings import (
    ConstantRaterError,
    DegenerateSubjectError,
    RatingMatrix,
    ScreeningPolicy,
    UnratedVideoError,
    compute_mos,
    confidence_z,
    screen_subjects,
    subject_stats,
    zprime_from_z,
    zscore_rescale,
)
from vqstudy.synthetic import make_study


def one_subject(values, name="s0"):
    values = np.asarray(values, dtype=float)
    videos = tuple(f"v{j}" for j in range(values.size))
    return RatingMatrix.full((name,), videos, values[None, :])


class TestRatingMatrix:
    def test_duplicate_subject_rejected(self):
        with pytest.raises(ValueError, match="duplicate subject"):
            RatingMatrix.full(("s0", "s0"), ("v0",), [[1.0], [2.0]])

    def test_duplicate_video_rejected(self):
        with pytest.raises(ValueError, match="duplicate video"):
            RatingMatrix.full(("s0",), ("v0", "v0"), [[1.0, 2.0]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match"):
            RatingMatrix.full(("s0", "s1"), ("v0",), [[1.0, 2.0]])

    def test_out_of_scale_rejected(self):
        with pytest.raises(ValueError, match="outside the declared scale"):
            one_subject([3.0, 11.0])

    def test_masked_entries_ignore_scale(self):
        m = RatingMatrix(("s0",), ("v0", "v1"), np.array([[99.0, 5.0]]), np.array([[False, True]]))
        assert m.n_ratings == 1

    def test_drop_subjects(self):
        m = RatingMatrix.full(("s0", "s1", "s2"), ("v0",), [[1.0], [2.0], [3.0]])
        reduced = m.drop_subjects(["s1"])
        assert reduced.subjects == ("s0", "s2")
        assert reduced.scores[:, 0].tolist() == [1.0, 3.0]


class TestSubjectStats:
    def test_mean_and_sample_std(self):
        stats = subject_stats(one_subject([4, 6, 8]))
        assert stats.mean[0] == 6.0
        assert stats.std[0] == 2.0

    def test_constant_rater_has_zero_std(self):
        stats = subject_stats(one_subject([5, 5, 5, 5]))
        assert stats.mean[0] == 5.0
        assert stats.std[0] == 0.0

    def test_two_extreme_ratings(self):
        stats = subject_stats(one_subject([1, 10]))
        assert stats.mean[0] == 5.5
        assert stats.std[0] == pytest.approx(math.sqrt(40.5), abs=1e-12)
        assert stats.std[0] == pytest.approx(6.364, abs=1e-3)

    def test_degenerate_subject_named(self):
        m = RatingMatrix(
            ("good", "lonely"),
            ("v0", "v1"),
            np.array([[4.0, 6.0], [5.0, 5.0]]),
            np.array([[True, True], [True, False]]),
        )
        with pytest.raises(DegenerateSubjectError, match="lonely"):
            subject_stats(m)

    def test_std_uses_present_ratings_only(self):
        m = RatingMatrix(
            ("s0",),
            ("v0", "v1", "v2", "v3"),
            np.array([[4.0, 6.0, 8.0, 999.0]]),
            np.array([[True, True, True, False]]),
        )
        m = RatingMatrix(m.subjects, m.videos, np.array([[4.0, 6.0, 8.0, 9.0]]), m.mask)
        stats = subject_stats(m)
        assert stats.mean[0] == 6.0
        assert stats.std[0] == 2.0
        assert stats.count[0] == 3


class TestZscoreRescale:
    def test_rating_at_subject_mean_maps_to_50(self):
        z = zscore_rescale(one_subject([4, 6, 8]))
        assert z.values[0, 1] == 50.0

    def test_direct_substitution(self):
        # r=8 with mean 6, std 2 -> z=1 -> z' = 100*4/6
        z = zscore_rescale(one_subject([4, 6, 8]))
        assert z.values[0, 2] == pytest.approx(100.0 * 4.0 / 6.0, abs=1e-12)
        assert z.values[0, 2] == pytest.approx(66.667, abs=1e-3)

    def test_affine_endpoints_are_exact(self):
        assert zprime_from_z(-3.0) == 0.0
        assert zprime_from_z(3.0) == 100.0
        assert zprime_from_z(0.0) == 50.0

    def test_clipping_beyond_three_sigma(self):
        assert zprime_from_z(-8.0) == 0.0
        assert zprime_from_z(7.5) == 100.0

    def test_constant_rater_named(self):
        m = RatingMatrix.full(("ok", "flat"), ("v0", "v1"), [[4.0, 6.0], [5.0, 5.0]])
        with pytest.raises(ConstantRaterError, match="flat"):
            zscore_rescale(m)

    def test_stats_must_match_matrix(self):
        stats = subject_stats(one_subject([4, 6, 8], name="other"))
        with pytest.raises(ValueError, match="do not match"):
            zscore_rescale(one_subject([4, 6, 8]), stats)

    def test_order_preserving_per_subject(self):
        m = make_study(6, 30, seed=5)
        z = zscore_rescale(m)
        for i in range(len(m.subjects)):
            order = np.argsort(m.scores[i], kind="stable")
            assert np.all(np.diff(z.values[i][order]) >= 0)

    def test_adding_constant_to_one_subject_changes_nothing(self):
        m = make_study(5, 20, seed=7, scale=(1.0, 10.0))
        scores = m.scores.copy()
        scores[2] += 30.0  # push outside the scale; widen bounds for the test
        m1 = RatingMatrix(m.subjects, m.videos, m.scores, m.mask, (-50.0, 50.0))
        m2 = RatingMatrix(m.subjects, m.videos, scores, m.mask, (-50.0, 50.0))
        z1 = zscore_rescale(m1)
        z2 = zscore_rescale(m2)
        np.testing.assert_allclose(z2.values[2], z1.values[2], rtol=0, atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_zprime_always_within_bounds(self, seed):
        rng = np.random.default_rng(seed)
        m = make_study(5, 12, seed=seed % 991, noise=float(rng.uniform(0.1, 2.0)))
        z = zscore_rescale(m)
        assert np.all(z.values[z.mask] >= 0.0)
        assert np.all(z.values[z.mask] <= 100.0)

    def test_normalized_scores_have_unit_stats(self):
        m = make_study(20, 60, seed=42)
        stats = subject_stats(m)
        z = (m.scores - stats.mean[:, None]) / stats.std[:, None]
        np.testing.assert_allclose(z.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=1, ddof=1), 1.0, rtol=1e-12)


class TestComputeMos:
    def test_identical_scores(self):
        z = zscore_rescale(make_study(4, 6, seed=1))
        values = np.full_like(z.values, 50.0)
        table = compute_mos(type(z)(z.subjects, z.videos, values, z.mask))
        assert np.all(table.mos == 50.0)
        assert np.all(table.std == 0.0)

    def test_two_ratings_mean_and_std(self):
        from vqstudy.ratings import RescaledScores

        r = RescaledScores(("s0", "s1"), ("v0",), np.array([[40.0], [60.0]]), np.ones((2, 1), bool))
        table = compute_mos(r)
        assert table.mos[0] == 50.0
        assert table.std[0] == pytest.approx(math.sqrt(200.0), abs=1e-12)
        assert table.std[0] == pytest.approx(14.142, abs=1e-3)

    def test_symmetric_three_ratings(self):
        from vqstudy.ratings import RescaledScores

        r = RescaledScores(
            ("s0", "s1", "s2"), ("v0",), np.array([[0.0], [50.0], [100.0]]), np.ones((3, 1), bool)
        )
        assert compute_mos(r).mos[0] == 50.0

    def test_unrated_video_named(self):
        from vqstudy.ratings import RescaledScores

        r = RescaledScores(
            ("s0",), ("v0", "dead"), np.array([[50.0, np.nan]]), np.array([[True, False]])
        )
        with pytest.raises(UnratedVideoError, match="dead"):
            compute_mos(r)

    def test_permutation_invariance(self):
        m = make_study(8, 15, seed=3)
        z = zscore_rescale(m)
        table = compute_mos(z)
        perm_s = np.random.default_rng(0).permutation(len(m.subjects))
        perm_v = np.random.default_rng(1).permutation(len(m.videos))
        from vqstudy.ratings import RescaledScores

        shuffled = RescaledScores(
            tuple(z.subjects[i] for i in perm_s),
            tuple(z.videos[j] for j in perm_v),
            z.values[np.ix_(perm_s, perm_v)],
            z.mask[np.ix_(perm_s, perm_v)],
        )
        table2 = compute_mos(shuffled)
        for j, vid in enumerate(shuffled.videos):
            orig = table.mos[z.videos.index(vid)]
            assert table2.mos[j] == pytest.approx(orig, rel=1e-12)

    def test_mos_within_bounds(self):
        for seed in range(10):
            z = zscore_rescale(make_study(10, 20, seed=seed, noise=1.5))
            table = compute_mos(z)
            assert np.all(table.mos >= 0.0) and np.all(table.mos <= 100.0)

    def test_rating_count_tracks_mask(self):
        m = make_study(6, 8, seed=11)
        mask = m.mask.copy()
        mask[0, 3] = False
        m = RatingMatrix(m.subjects, m.videos, m.scores, mask)
        table = compute_mos(zscore_rescale(m))
        assert table.n[3] == 5
        assert table.n[0] == 6

    def test_confidence_z_value(self):
        assert confidence_z(0.95) == pytest.approx(1.959964, abs=1e-6)


def balanced_outlier_study(seed=404):
    """19 honest raters with uniform noise plus one balanced extreme rater.

    Uniform noise keeps honest deviations inside two pooled standard
    deviations while the planted rater alternates far above and far
    below consensus, which is exactly the frequent-and-symmetric pattern
    the screening procedure targets.
    """
    rng = np.random.default_rng(seed)
    n_honest, n_videos = 19, 60
    consensus = rng.uniform(4.5, 6.5, size=n_videos)
    honest = consensus[None, :] + rng.uniform(-1.5, 1.5, size=(n_honest, n_videos))
    offset = 2.6 * np.where(np.arange(n_videos) % 2 == 0, 1.0, -1.0)
    outlier = consensus + offset
    scores = np.vstack([honest, outlier[None, :]])
    subjects = tuple(f"s{i:02d}" for i in range(n_honest)) + ("wild",)
    videos = tuple(f"v{j:02d}" for j in range(n_videos))
    return RatingMatrix.full(subjects, videos, np.clip(scores, 1.0, 10.0))


class TestScreening:
    def test_policy_validation(self):
        with pytest.raises(ValueError):
            ScreeningPolicy(kurtosis_low=4.0, kurtosis_high=2.0)
        with pytest.raises(ValueError):
            ScreeningPolicy(max_outlier_fraction=0.0)

    def test_subject_matching_consensus_is_clean(self):
        # every subject scores the per-video mean exactly
        scores = np.tile(np.array([[3.0, 5.0, 7.0, 9.0]]), (6, 1))
        m = RatingMatrix.full(tuple(f"s{i}" for i in range(6)), ("a", "b", "c", "d"), scores)
        report = screen_subjects(m)
        assert np.all(report.p_counts == 0)
        assert np.all(report.q_counts == 0)
        assert not np.any(report.rejected)

    def test_balanced_extreme_rater_is_rejected(self):
        m = balanced_outlier_study()
        report = screen_subjects(m)
        assert report.rejected_subjects == ("wild",)
        p, q, rejected, _ = screening_bruteforce(m.scores, m.mask, report.policy)
        assert rejected[-1] is True

    def test_matches_bruteforce_reference(self):
        policy = ScreeningPolicy()
        for seed in range(30):
            m = make_study(12, 25, seed=seed, noise=1.2)
            report = screen_subjects(m, policy)
            p, q, rejected, kurt = screening_bruteforce(m.scores, m.mask, policy)
            assert report.p_counts.tolist() == p
            assert report.q_counts.tolist() == q
            assert report.rejected.tolist() == rejected
            np.testing.assert_allclose(report.video_kurtosis, kurt, rtol=1e-9)

    def test_realistic_panel_has_zero_rejections(self):
        # mirrors a well-behaved panel: screening keeps everyone
        m = make_study(20, 60, seed=2027)
        report = screen_subjects(m)
        assert report.rejected_subjects == ()

    def test_idempotent_after_removal(self):
        m = balanced_outlier_study()
        first = screen_subjects(m)
        cleaned = m.drop_subjects(first.rejected_subjects)
        second = screen_subjects(cleaned)
        assert second.rejected_subjects == ()

    def test_counts_bounded_by_ratings(self):
        m = balanced_outlier_study()
        report = screen_subjects(m)
        ratings = m.mask.sum(axis=1)
        assert np.all(report.p_counts + report.q_counts <= ratings)
