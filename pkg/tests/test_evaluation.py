import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anchortopics.corpus import SparseBinaryMatrix
from anchortopics.evaluation import (
    BernoulliNBModel,
    UndefinedAUCError,
    auc,
    auc_pairwise,
    exact_total_correlation,
    f1,
    generate_correlated_blocks,
    generate_synthetic,
    macro,
    metrics_report_bytes,
    metrics_report_text,
    mutual_information_2x2,
    nb_fit,
    nb_predict,
    partitions_match,
    evaluate_factors,
)


class TestF1:
    def test_identity(self):
        p, r, f = f1([1, 0, 1], [1, 0, 1])
        assert (p, r, f) == (1.0, 1.0, 1.0)

    def test_all_negative_prediction(self):
        p, r, f = f1([0, 0, 0], [1, 0, 1])
        assert (p, r, f) == (0.0, 0.0, 0.0)

    def test_hand_counted_confusion(self):
        p, r, f = f1([1, 1, 0, 0], [1, 0, 1, 0])
        assert (p, r, f) == (0.5, 0.5, 0.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1([1, 0], [1])

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50))
    def test_permutation_invariant(self, pairs):
        pred = np.array([a for a, _ in pairs], dtype=int)
        truth = np.array([b for _, b in pairs], dtype=int)
        rng = np.random.default_rng(0)
        perm = rng.permutation(len(pairs))
        assert f1(pred, truth) == f1(pred[perm], truth[perm])


class TestAUC:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_all_ties(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_hand_counted_pairs(self):
        assert auc([0.9, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == 0.75

    def test_degenerate_truth_raises(self):
        with pytest.raises(UndefinedAUCError):
            auc([0.1, 0.2], [1, 1])

    def test_matches_bruteforce_exactly_on_random_inputs(self):
        rng = np.random.default_rng(7)
        for case in range(200):
            n = int(rng.integers(2, 501))
            truth = rng.integers(0, 2, size=n)
            if truth.sum() in (0, n):
                truth[0], truth[-1] = 0, 1
            # quantized scores force plenty of ties
            scores = np.round(rng.random(n), 2)
            assert auc(scores, truth) == auc_pairwise(scores, truth)


class TestMacro:
    def test_single(self):
        assert macro({"a": 1.0}) == (1.0, [])

    def test_mean(self):
        value, excluded = macro({"a": 0.6, "b": 0.8})
        assert value == pytest.approx(0.7)
        assert excluded == []

    def test_exclusion(self):
        value, excluded = macro({"a": 0.6, "b": None})
        assert value == pytest.approx(0.6)
        assert excluded == ["b"]


class TestBernoulliNB:
    def test_nearest_prototype(self):
        mat = SparseBinaryMatrix.from_dense(np.array([[1, 0], [0, 1]]))
        model = nb_fit(mat, np.array([0, 1]))
        scores, labels = nb_predict(model, mat)
        assert labels.tolist() == [0, 1]

    def test_uninformative_features_give_prior(self):
        # identical features and balanced classes: smoothed conditionals
        # cancel exactly, leaving the class prior
        dense = np.ones((8, 3), dtype=int)
        mat = SparseBinaryMatrix.from_dense(dense)
        y = np.array([1, 1, 1, 1, 0, 0, 0, 0])
        model = nb_fit(mat, y)
        scores, _ = nb_predict(model, mat)
        assert np.allclose(scores, 0.5, atol=1e-12)

    def test_hand_computed_posterior(self):
        # classes: doc [1,0] -> 0, doc [0,1] -> 1; add-one smoothing gives
        # p(x|c) in {1/3, 2/3}; posterior of class 1 for [1,0] is 1/5.
        mat = SparseBinaryMatrix.from_dense(np.array([[1, 0], [0, 1]]))
        model = nb_fit(mat, np.array([0, 1]))
        scores, _ = nb_predict(model, mat)
        assert scores[0] == pytest.approx(0.2, abs=1e-12)
        assert scores[1] == pytest.approx(0.8, abs=1e-12)

    def test_scores_are_probabilities(self):
        rng = np.random.default_rng(3)
        dense = (rng.random((40, 6)) < 0.4).astype(int)
        y = rng.integers(0, 2, size=40)
        y[:2] = [0, 1]
        model = nb_fit(mat := SparseBinaryMatrix.from_dense(dense), y)
        scores, labels = nb_predict(model, mat)
        assert np.all((scores >= 0) & (scores <= 1))
        assert np.array_equal(labels, (scores >= 0.5).astype(int))


class TestMutualInformation2x2:
    def test_independence(self):
        assert mutual_information_2x2([[25, 25], [25, 25]]) == pytest.approx(0.0, abs=1e-12)

    def test_deterministic_coupling(self):
        assert mutual_information_2x2([[50, 0], [0, 50]]) == pytest.approx(math.log(2), abs=1e-12)

    def test_frozen_derived_value(self):
        # 0.8*ln(1.6) + 0.2*ln(0.4)
        expected = 0.8 * math.log(1.6) + 0.2 * math.log(0.4)
        assert expected == pytest.approx(0.192745, abs=5e-7)
        assert mutual_information_2x2([[40, 10], [10, 40]]) == pytest.approx(expected, abs=1e-12)


class TestExactTotalCorrelation:
    def test_independent_columns(self):
        rng = np.random.default_rng(0)
        cols = np.stack([np.repeat([0, 1], 8), np.tile([0, 1], 8)], axis=1)
        assert exact_total_correlation(cols) == pytest.approx(0.0, abs=1e-12)

    def test_identical_uniform_binary_columns(self):
        col = np.repeat([0, 1], 10)
        samples = np.stack([col, col], axis=1)
        assert exact_total_correlation(samples) == pytest.approx(math.log(2), abs=1e-12)

    def test_xor_triple(self):
        rows = []
        for x1 in (0, 1):
            for x2 in (0, 1):
                rows.append([x1, x2, x1 ^ x2])
        samples = np.array(rows * 5)
        assert exact_total_correlation(samples) == pytest.approx(math.log(2), abs=1e-12)

    def test_additive_over_independent_blocks(self):
        col = np.repeat([0, 1], 8)
        other = np.tile(np.repeat([0, 1], 4), 2)
        samples = np.stack([col, col, other, other], axis=1)
        expected = 2 * math.log(2)
        assert exact_total_correlation(samples) == pytest.approx(expected, abs=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            samples = rng.integers(0, 2, size=(30, 4))
            assert exact_total_correlation(samples) >= -1e-12

    def test_too_many_columns(self):
        with pytest.raises(ValueError, match="support too large"):
            exact_total_correlation(np.zeros((4, 21), dtype=int))


class TestGenerateSynthetic:
    def test_zero_noise_copies_factors(self):
        syn = generate_synthetic(2, 3, 0.0, 50, seed=1)
        dense = syn.matrix.to_dense()
        for i, block in enumerate(syn.word_block):
            assert np.array_equal(dense[:, i], syn.factor_states[:, block])

    def test_half_noise_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(2, 3, 0.5, 10, seed=0)

    def test_within_block_correlation_matches_analytic(self):
        syn = generate_synthetic(2, 10, 0.1, 500, seed=9)
        dense = syn.matrix.to_dense().astype(float)
        corrs = []
        for a in range(9):
            for b in range(a + 1, 10):
                corrs.append(np.corrcoef(dense[:, a], dense[:, b])[0, 1])
        assert np.mean(corrs) == pytest.approx((1 - 2 * 0.1) ** 2, abs=0.05)

    def test_deterministic(self):
        a = generate_synthetic(2, 4, 0.2, 40, seed=3)
        b = generate_synthetic(2, 4, 0.2, 40, seed=3)
        assert np.array_equal(a.matrix.to_dense(), b.matrix.to_dense())
        assert np.array_equal(a.factor_states, b.factor_states)

    def test_correlated_blocks_parent_structure(self):
        # (1-2*flip)^2 is the exact correlation for a uniform parent
        syn = generate_correlated_blocks(5, 0.0, 0.1, 4000, seed=2, state_prior=0.5)
        b, c = syn.factor_states[:, 1].astype(float), syn.factor_states[:, 2].astype(float)
        assert np.corrcoef(b, c)[0, 1] == pytest.approx((1 - 2 * 0.1) ** 2, abs=0.07)


class TestPartitionMatch:
    def test_match_up_to_relabeling(self):
        assert partitions_match([1, 1, 0, 0], [0, 0, 1, 1])

    def test_mismatch(self):
        assert not partitions_match([0, 1, 0, 1], [0, 0, 1, 1])

    def test_unassigned_fails(self):
        assert not partitions_match([-1, 0, 1, 1], [0, 0, 1, 1])

    def test_merged_factors_fail(self):
        assert not partitions_match([0, 0, 0, 0], [0, 0, 1, 1])


class TestMetricsReport:
    def _report(self):
        scores = np.array([[0.9, 0.1], [0.8, 0.4], [0.2, 0.7], [0.1, 0.6]])
        truth = {"alpha": np.array([1, 1, 0, 0]), "beta": np.array([0, 0, 1, 1])}
        return evaluate_factors(scores, [("alpha", 0), ("beta", 1)], truth)

    def test_structure(self):
        report = self._report()
        assert report["labels"]["alpha"]["f1"] == 1.0
        assert report["labels"]["alpha"]["auc"] == 1.0
        assert report["macro"]["f1"] == 1.0
        assert report["auc_excluded"] == []

    def test_bytes_stable(self):
        assert metrics_report_bytes(self._report()) == metrics_report_bytes(self._report())

    def test_text_table_has_macro_row(self):
        text = metrics_report_text(self._report())
        assert "macro" in text
        assert "alpha" in text and "beta" in text
