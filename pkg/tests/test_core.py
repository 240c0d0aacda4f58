"""Core types and the normal CDF primitive."""

import math

import numpy as np
import pytest

from lidu.core import (
    LiduConfig,
    RankedPrediction,
    ScoreDistribution,
    ValidationError,
    standard_normal_cdf,
)

# High-precision reference for Phi(1), cross-checked below by an independent
# Taylor-series oracle.
PHI_ONE = 0.8413447460685429


def _phi_series(x, terms=60):
    """Independent oracle: Phi(x) = 1/2 + (1/sqrt(2 pi)) * sum of the
    alternating Taylor series of the Gaussian integral."""
    total = 0.0
    for k in range(terms):
        total += (-1) ** k * x ** (2 * k + 1) / (math.factorial(k) * 2**k * (2 * k + 1))
    return 0.5 + total / math.sqrt(2.0 * math.pi)


class TestStandardNormalCdf:
    def test_zero_is_half(self):
        assert standard_normal_cdf(0.0) == 0.5

    def test_phi_one_against_series_oracle(self):
        oracle = _phi_series(1.0)
        assert abs(oracle - PHI_ONE) < 1e-13
        assert abs(standard_normal_cdf(1.0) - oracle) < 1e-12

    def test_negative_symmetry(self):
        assert abs(standard_normal_cdf(-1.0) - (1.0 - standard_normal_cdf(1.0))) < 1e-12

    def test_symmetry_property(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-8.0, 8.0, size=2000)
        np.testing.assert_allclose(
            standard_normal_cdf(x) + standard_normal_cdf(-x), 1.0, atol=1e-12
        )

    def test_monotone(self):
        x = np.linspace(-8.0, 8.0, 5000)
        assert np.all(np.diff(standard_normal_cdf(x)) >= 0)


class TestScoreDistribution:
    def test_rejects_negative_variance(self):
        with pytest.raises(ValidationError):
            ScoreDistribution(0.0, -1e-9)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            ScoreDistribution(float("nan"), 1.0)
        with pytest.raises(ValidationError):
            ScoreDistribution(0.0, float("inf"))


class TestRankedPrediction:
    def test_sorted_non_increasing_ties_by_id(self):
        pred = RankedPrediction("u", [3, 1, 2], [1.0, 2.0, 1.0], [0.1, 0.1, 0.1])
        assert pred.item_ids.tolist() == [1, 2, 3]
        assert pred.means.tolist() == [2.0, 1.0, 1.0]

    def test_deterministic_regardless_of_input_order(self):
        rng = np.random.default_rng(3)
        ids = list(range(20))
        means = rng.normal(size=20)
        means[4] = means[11]  # force one tie
        variances = rng.random(20)
        a = RankedPrediction("u", ids, means, variances)
        perm = rng.permutation(20)
        b = RankedPrediction("u", [ids[i] for i in perm], means[perm], variances[perm])
        assert a.item_ids.tolist() == b.item_ids.tolist()
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.variances, b.variances)

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValidationError):
            RankedPrediction("u", [1, 1], [1.0, 0.0], [0.0, 0.0])

    def test_items_view(self):
        pred = RankedPrediction("u", ["a", "b"], [0.5, 1.5], [0.0, 0.2])
        items = pred.items
        assert items[0][0] == "b"
        assert items[0][1] == ScoreDistribution(1.5, 0.2)


class TestLiduConfig:
    def test_validates_bounds(self):
        with pytest.raises(ValidationError):
            LiduConfig(n_top=10, l_max=5)
        with pytest.raises(ValidationError):
            LiduConfig(dropout_p=0.0)
        with pytest.raises(ValidationError):
            LiduConfig(backend="something_else")

    def test_defaults_ok(self):
        cfg = LiduConfig()
        assert cfg.n_top == 100 and cfg.l_max == 1000
