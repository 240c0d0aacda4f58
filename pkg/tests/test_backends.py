"""Variance backends: sample reduction, MC dropout, ensembles, Gaussian head."""

import numpy as np
import pytest

from lidu.backends import (
    SamplePack,
    ensemble_predict,
    ensemble_scores,
    gaussian_head_predict,
    mc_dropout_predict,
    mc_dropout_scores,
    variance_from_samples,
)
from lidu.core import ValidationError
from lidu.models import MfModel, init_model


def _tiny_model(seed=0, n_users=5, n_items=6, d=8, variance_tower=False):
    return init_model(
        list(range(n_users)), list(range(n_items)), d, seed,
        variance_tower=variance_tower,
    )


class TestVarianceFromSamples:
    def test_constant_samples(self):
        dists = variance_from_samples(SamplePack(np.full((4, 3), 3.0)))
        assert all(d.mean == 3.0 and d.variance == 0.0 for d in dists)

    def test_two_samples(self):
        # ((1-2)^2 + (3-2)^2) / 2 = 1, population variance
        (d,) = variance_from_samples(SamplePack(np.array([[1.0], [3.0]])))
        assert d.mean == 2.0 and d.variance == 1.0

    def test_three_samples(self):
        # (4 + 4 + 16) / 3 = 8
        (d,) = variance_from_samples(SamplePack(np.array([[0.0], [0.0], [6.0]])))
        assert d.mean == 2.0 and abs(d.variance - 8.0) < 1e-12

    def test_requires_two_passes(self):
        with pytest.raises(ValidationError):
            SamplePack(np.ones((1, 3)))

    def test_zero_variance_iff_identical(self):
        rng = np.random.default_rng(2)
        samples = rng.normal(size=(6, 4))
        samples[:, 2] = 1.25
        dists = variance_from_samples(SamplePack(samples))
        assert dists[2].variance == 0.0
        assert all(dists[j].variance > 0 for j in (0, 1, 3))


class TestMcDropout:
    def test_deterministic_given_seed(self):
        model = _tiny_model()
        a = mc_dropout_scores(model, 1, [0, 2, 4], 0.2, 7, seed=42)
        b = mc_dropout_scores(model, 1, [0, 2, 4], 0.2, 7, seed=42)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_small_p_limit(self):
        model = _tiny_model()
        means, variances = mc_dropout_scores(model, 0, list(range(6)), 1e-9, 16, seed=1)
        det = model.item_emb @ model.user_emb[0]
        np.testing.assert_allclose(means, det, atol=1e-8)
        assert np.all(variances < 1e-12)

    def test_zero_user_embedding(self):
        model = _tiny_model()
        model.user_emb[3] = 0.0
        means, variances = mc_dropout_scores(model, 3, [0, 1], 0.3, 9, seed=5)
        assert np.all(means == 0.0) and np.all(variances == 0.0)

    def test_mean_converges_to_deterministic(self):
        # inverted dropout is unbiased: with t = 2000 the MC mean sits within
        # 5 standard errors of the plain dot product
        model = _tiny_model(seed=3)
        t = 2000
        means, variances = mc_dropout_scores(model, 2, list(range(6)), 0.2, t, seed=11)
        det = model.item_emb @ model.user_emb[2]
        se = np.sqrt(variances / t)
        assert np.all(np.abs(means - det) <= 5.0 * se + 1e-12)

    def test_predict_wraps_distributions(self):
        model = _tiny_model()
        dists = mc_dropout_predict(model, 0, [1, 2], 0.2, 5, seed=0)
        assert len(dists) == 2 and all(d.variance >= 0 for d in dists)

    def test_rejects_bad_params(self):
        model = _tiny_model()
        with pytest.raises(ValidationError):
            mc_dropout_scores(model, 0, [0], 1.0, 5, seed=0)
        with pytest.raises(ValidationError):
            mc_dropout_scores(model, 0, [0], 0.2, 1, seed=0)


class TestEnsemble:
    def test_identical_models_zero_variance(self):
        model = _tiny_model()
        dists = ensemble_predict([model, model], 0, [0, 1, 2])
        assert all(d.variance == 0.0 for d in dists)

    def test_two_models_moments(self):
        a = _tiny_model(seed=0, d=1)
        b = _tiny_model(seed=0, d=1)
        a.user_emb[0, 0], a.item_emb[0, 0] = 1.0, 1.0
        b.user_emb[0, 0], b.item_emb[0, 0] = 1.0, 3.0
        means, variances = ensemble_scores([a, b], 0, [0])
        assert means[0] == 2.0 and variances[0] == 1.0

    def test_five_member_pack_shape(self):
        models = [_tiny_model(seed=s) for s in range(5)]
        means, variances = ensemble_scores(models, 1, [0, 1])
        assert means.shape == (2,) and np.all(variances > 0)

    def test_permutation_invariant(self):
        models = [_tiny_model(seed=s) for s in range(4)]
        a = ensemble_scores(models, 2, [0, 3, 5])
        b = ensemble_scores(models[::-1], 2, [0, 3, 5])
        np.testing.assert_allclose(a[0], b[0], atol=1e-12)
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)

    def test_id_space_mismatch(self):
        a = _tiny_model()
        b = init_model(list(range(5)), list(range(7)), 8, 0)
        with pytest.raises(ValidationError):
            ensemble_scores([a, b], 0, [0])


class TestGaussianHead:
    def test_zero_towers_give_unit_variance(self):
        model = _tiny_model(variance_tower=True)
        model.user_emb2[:] = 0.0
        model.item_emb2[:] = 0.0
        dists = gaussian_head_predict(model, 0, [0, 1, 2])
        assert all(d.variance == 1.0 for d in dists)

    def test_variance_strictly_positive(self):
        model = _tiny_model(seed=9, variance_tower=True)
        dists = gaussian_head_predict(model, 4, list(range(6)))
        assert all(d.variance > 0 for d in dists)

    def test_requires_variance_tower(self):
        model = _tiny_model()
        with pytest.raises(ValidationError):
            gaussian_head_predict(model, 0, [0])

    def test_mean_matches_score(self):
        from lidu.models import score

        model = _tiny_model(seed=4, variance_tower=True)
        dists = gaussian_head_predict(model, 2, [1, 3])
        assert abs(dists[0].mean - score(model, 2, 1)) < 1e-12
