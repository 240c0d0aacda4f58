"""Pairwise and list probabilities, the top-N variant, and their invariants."""

import math

import numpy as np
import pytest

from lidu.core import LiduConfig, RankedPrediction, ScoreDistribution, ValidationError
from lidu.uncertainty import (
    lidu_full,
    lidu_topn,
    list_log_prob,
    pairwise_prob,
    pointwise_uncertainty,
    position_weight,
    step_index,
)

PHI_ONE = 0.8413447460685429


def _scalar_phi(x):
    # independent of lidu.core: plain erfc evaluation
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _brute_force_log_prob(means, variances, k):
    """Oracle: explicit pair-by-pair enumeration with scalar math only."""
    total = 0.0
    n = len(means)
    for a in range(k):
        for b in range(a + 1, n):
            tv = variances[a] + variances[b]
            gap = means[a] - means[b]
            if tv == 0.0:
                pi = 1.0 if gap > 0 else (0.0 if gap < 0 else 0.5)
            else:
                pi = _scalar_phi(gap / math.sqrt(tv))
            total += math.log(max(pi, 1e-300))
    return total


def _random_pred(rng, n):
    means = rng.normal(scale=2.0, size=n)
    variances = rng.random(n) * 2.0
    return RankedPrediction("u", list(range(n)), means, variances)


class TestPairwiseProb:
    def test_equal_means_half(self):
        a = ScoreDistribution(1.0, 0.3)
        b = ScoreDistribution(1.0, 0.7)
        assert pairwise_prob(a, b) == 0.5

    def test_one_sigma_gap(self):
        a = ScoreDistribution(1.0, 0.5)
        b = ScoreDistribution(0.0, 0.5)
        assert abs(pairwise_prob(a, b) - PHI_ONE) < 1e-12

    def test_degenerate_zero_variance(self):
        assert pairwise_prob(ScoreDistribution(2.0, 0.0), ScoreDistribution(1.0, 0.0)) == 1.0
        assert pairwise_prob(ScoreDistribution(1.0, 0.0), ScoreDistribution(2.0, 0.0)) == 0.0
        assert pairwise_prob(ScoreDistribution(1.0, 0.0), ScoreDistribution(1.0, 0.0)) == 0.5


class TestListLogProb:
    def test_singleton_is_zero(self):
        pred = RankedPrediction("u", [0], [3.0], [0.5])
        assert list_log_prob(pred, 1) == 0.0

    def test_equal_pair_is_log_half(self):
        pred = RankedPrediction("u", [0, 1], [1.0, 1.0], [0.4, 0.4])
        assert abs(list_log_prob(pred, 2) - math.log(0.5)) < 1e-12

    def test_three_items_matches_hand_expansion(self):
        rng = np.random.default_rng(11)
        pred = _random_pred(rng, 3)
        expected = _brute_force_log_prob(pred.means, pred.variances, 3)
        assert abs(list_log_prob(pred, 3) - expected) < 1e-10

    def test_k_out_of_range(self):
        pred = RankedPrediction("u", [0, 1], [1.0, 0.0], [0.1, 0.1])
        with pytest.raises(ValidationError):
            list_log_prob(pred, 3)
        with pytest.raises(ValidationError):
            list_log_prob(pred, 0)


class TestLiduFull:
    def test_singleton(self):
        assert lidu_full(RankedPrediction("u", [0], [1.0], [0.0]), 1).value == 0.0

    def test_equal_pair(self):
        pred = RankedPrediction("u", [0, 1], [1.0, 1.0], [0.4, 0.4])
        assert abs(lidu_full(pred, 2).value - math.log(2.0)) < 1e-12

    def test_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            pred = _random_pred(rng, int(rng.integers(1, 8)))
            assert lidu_full(pred, len(pred)).value >= 0.0

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            pred = _random_pred(rng, n)
            oracle = -_brute_force_log_prob(pred.means, pred.variances, n)
            assert abs(lidu_full(pred, n).value - oracle) < 1e-10


class TestStepAndWeight:
    def test_step_examples(self):
        assert step_index(1) == 2
        assert step_index(3) == 5
        assert step_index(4) == 8

    def test_weight_examples(self):
        assert position_weight(1) == 1.0
        assert position_weight(3) == 2.0
        assert position_weight(7) == 3.0


class TestLiduTopn:
    def _cfg(self, n_top, l_max, literal=False):
        return LiduConfig(n_top=n_top, l_max=l_max, dropout_p=0.2, n_passes=5,
                          literal_position_bias=literal)

    def test_equal_means_example(self):
        pred = RankedPrediction("u", [0, 1, 2, 3], [1.0] * 4, [0.5] * 4)
        out = lidu_topn(pred, self._cfg(1, 4))
        assert abs(out.value - 3.0 * math.log(2.0)) < 1e-12
        assert out.n_pairs_used == 3

    def test_no_pairs_when_step_exceeds_l(self):
        pred = RankedPrediction("u", [0], [1.0], [0.5])
        out = lidu_topn(pred, self._cfg(1, 1))
        assert out.value == 0.0 and out.n_pairs_used == 0

    def test_confident_zero_variance_list(self):
        pred = RankedPrediction("u", [0, 1, 2, 3], [4.0, 1.0, 0.5, 0.2], [0.0] * 4)
        assert lidu_topn(pred, self._cfg(1, 4)).value == 0.0

    def test_l_exceeding_candidates_errors(self):
        pred = RankedPrediction("u", [0, 1], [1.0, 0.0], [0.1, 0.1])
        with pytest.raises(ValidationError):
            lidu_topn(pred, self._cfg(1, 3))

    def test_hook_matches_lidu_full(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            n = int(rng.integers(2, 7))
            pred = _random_pred(rng, n)
            cfg = self._cfg(n, n)
            hooked = lidu_topn(pred, cfg, step_fn=lambda r: r + 1, weight_fn=lambda r: 1.0)
            full = lidu_full(pred, n)
            assert abs(hooked.value - full.value) < 1e-10

    def test_shift_invariance(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n = int(rng.integers(4, 12))
            pred = _random_pred(rng, n)
            shifted = RankedPrediction("u", pred.item_ids, pred.means + 37.5, pred.variances)
            cfg = self._cfg(2, n)
            assert abs(lidu_topn(pred, cfg).value - lidu_topn(shifted, cfg).value) < 1e-9
            assert abs(lidu_full(pred, n).value - lidu_full(shifted, n).value) < 1e-9

    def test_separation_monotonicity(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            n = int(rng.integers(4, 10))
            means = np.sort(rng.normal(size=n))[::-1]
            variances = rng.random(n) + 0.05
            base = RankedPrediction("u", list(range(n)), means, variances)
            scaled_means = means[0] + 1.7 * (means - means[0])
            wide = RankedPrediction("u", list(range(n)), scaled_means, variances)
            cfg = self._cfg(2, n)
            assert lidu_topn(wide, cfg).value <= lidu_topn(base, cfg).value + 1e-12

    def test_variance_monotonicity(self):
        rng = np.random.default_rng(19)
        for _ in range(30):
            n = int(rng.integers(4, 10))
            means = np.sort(rng.normal(size=n))[::-1]
            means[0] += 0.5  # keep the top item strictly highest
            variances = rng.random(n) + 0.05
            base = RankedPrediction("u", list(range(n)), means, variances)
            noisy = RankedPrediction("u", list(range(n)), means, 3.0 * variances)
            cfg = self._cfg(2, n)
            assert lidu_topn(noisy, cfg).value >= lidu_topn(base, cfg).value - 1e-12

    def test_literal_bias_adds_constant_offset(self):
        # same mean structure, the literal reading differs from the discount
        # by a model-independent offset: sum over pairs of log p_n
        rng = np.random.default_rng(41)
        pred = _random_pred(rng, 12)
        cfg_d = self._cfg(4, 12)
        cfg_l = self._cfg(4, 12, literal=True)
        plain = lidu_topn(pred, cfg_d, weight_fn=lambda r: 1.0).value
        offset = sum(
            max(0, 12 - step_index(n) + 1) * math.log(position_weight(n))
            for n in range(1, 5)
        )
        assert abs(lidu_topn(pred, cfg_l).value - (plain + offset)) < 1e-9


class TestPointwise:
    def test_zero_variances(self):
        pred = RankedPrediction("u", [0, 1], [2.0, 1.0], [0.0, 0.0])
        assert pointwise_uncertainty(pred, 2) == 0.0

    def test_simple_sum(self):
        pred = RankedPrediction("u", [0, 1, 2], [3.0, 2.0, 1.0], [0.1, 0.2, 0.3])
        assert abs(pointwise_uncertainty(pred, 3) - 0.6) < 1e-15

    def test_top_one(self):
        pred = RankedPrediction("u", [0, 1], [3.0, 2.0], [0.25, 0.9])
        assert pointwise_uncertainty(pred, 1) == 0.25
