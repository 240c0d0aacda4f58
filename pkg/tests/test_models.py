"""Trainers, analytic gradients, checkpoints, and the per-user loss."""

import math

import numpy as np
import pytest

from lidu.core import DatasetSplit, Interaction, TrainingError, ValidationError
from lidu.models import (
    MfModel,
    TrainConfig,
    bpr_loss_and_grads,
    gaussian_nll_loss_and_grads,
    init_model,
    load_model,
    mse_loss_and_grads,
    save_model,
    score,
    train_bpr,
    train_gaussian_nll,
    train_mse,
    user_mean_loss,
)


def finite_difference_grads(loss_fn, arrays, h=1e-5):
    """Central finite differences of a scalar loss over a list of arrays."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + h
            up = loss_fn()
            arr[idx] = old - h
            down = loss_fn()
            arr[idx] = old
            g[idx] = (up - down) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    err = 0.0
    for a, f in zip(analytic, numeric):
        scale = max(np.abs(a).max(), np.abs(f).max(), 1e-8)
        err = max(err, float(np.abs(a - f).max()) / scale)
    return err


def random_gradcheck_instance(rng, loss_kind):
    n_u, n_i, d = 3, 4, 3
    U = rng.normal(scale=0.6, size=(n_u, d))
    I = rng.normal(scale=0.6, size=(n_i, d))
    m = 6
    u_idx = rng.integers(0, n_u, size=m)  # repeats exercise the scatter-add
    i_idx = rng.integers(0, n_i, size=m)
    if loss_kind == "mse":
        z = rng.normal(size=m)
        fn = lambda: mse_loss_and_grads(U, I, u_idx, i_idx, z)[0]
        analytic = mse_loss_and_grads(U, I, u_idx, i_idx, z)[1:]
        arrays = [U, I]
    elif loss_kind == "bpr":
        j_idx = rng.integers(0, n_i, size=m)
        l2 = 0.01
        fn = lambda: bpr_loss_and_grads(U, I, u_idx, i_idx, j_idx, l2)[0]
        analytic = bpr_loss_and_grads(U, I, u_idx, i_idx, j_idx, l2)[1:]
        arrays = [U, I]
    else:
        U2 = rng.normal(scale=0.6, size=(n_u, d))
        I2 = rng.normal(scale=0.6, size=(n_i, d))
        z = rng.normal(size=m)
        fn = lambda: gaussian_nll_loss_and_grads(U, I, U2, I2, u_idx, i_idx, z)[0]
        analytic = gaussian_nll_loss_and_grads(U, I, U2, I2, u_idx, i_idx, z)[1:]
        arrays = [U, I, U2, I2]
    return fn, analytic, arrays


class TestScore:
    def test_zero_user(self):
        model = init_model([0, 1], [0, 1, 2], 4, 0)
        model.user_emb[0] = 0.0
        assert all(score(model, 0, j) == 0.0 for j in range(3))

    def test_unit_basis(self):
        model = init_model([0], [0], 3, 0)
        model.user_emb[0] = [1.0, 0.0, 0.0]
        model.item_emb[0] = [1.0, 0.0, 0.0]
        assert score(model, 0, 0) == 1.0

    def test_hand_dot(self):
        model = init_model([0], [0], 2, 0)
        model.user_emb[0] = [1.0, 2.0]
        model.item_emb[0] = [3.0, -1.0]
        assert score(model, 0, 0) == 1.0

    def test_unknown_id(self):
        model = init_model([0], [0], 2, 0)
        with pytest.raises(ValidationError):
            score(model, 5, 0)


class TestGradients:
    @pytest.mark.parametrize("loss_kind", ["mse", "bpr", "nll"])
    def test_matches_finite_differences(self, loss_kind):
        rng = np.random.default_rng(hash(loss_kind) % 2**32)
        for _ in range(10):
            fn, analytic, arrays = random_gradcheck_instance(rng, loss_kind)
            numeric = finite_difference_grads(fn, arrays)
            assert max_relative_error(analytic, numeric) <= 1e-4

    def test_bpr_zero_embeddings_loss(self):
        U = np.zeros((2, 3))
        I = np.zeros((3, 3))
        loss, *_ = bpr_loss_and_grads(U, I, np.array([0]), np.array([0]), np.array([1]))
        assert abs(loss - math.log(2.0)) < 1e-12


class TestTrainMse:
    def test_single_triple_converges(self):
        cfg = TrainConfig(max_epochs=5000, patience=5000, d=1, seed=0)
        model = train_mse([(0, 0, 1.0)], cfg, [(0, 0, 1.0)])
        assert abs(score(model, 0, 0) - 1.0) < 1e-3

    def test_rank_one_recovery(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=6)
        y = rng.normal(size=6)
        z = np.outer(x, y)
        triples = [(i, j, z[i, j]) for i in range(6) for j in range(6)]
        order = rng.permutation(36)
        train = [triples[k] for k in order[:30]]
        valid = [triples[k] for k in order[30:]]
        cfg = TrainConfig(max_epochs=2000, patience=100, d=1, seed=1)
        model = train_mse(train, cfg, valid)
        pred = model.user_emb @ model.item_emb.T
        train_mse_val = np.mean([(zv - pred[i, j]) ** 2 for i, j, zv in train])
        assert train_mse_val < 1e-2

    def test_zero_epochs_returns_init(self):
        cfg = TrainConfig(max_epochs=0, d=2, seed=7)
        model = train_mse([(0, 0, 1.0), (1, 1, 2.0)], cfg, [(0, 1, 0.5)])
        init = init_model([0, 1], [0, 1], 2, 7)
        np.testing.assert_array_equal(model.user_emb, init.user_emb)
        np.testing.assert_array_equal(model.item_emb, init.item_emb)

    def test_deterministic(self):
        triples = [(i, j, float(i - j)) for i in range(4) for j in range(4)]
        cfg = TrainConfig(max_epochs=20, d=2, seed=3)
        a = train_mse(triples[:12], cfg, triples[12:])
        b = train_mse(triples[:12], cfg, triples[12:])
        np.testing.assert_array_equal(a.user_emb, b.user_emb)
        np.testing.assert_array_equal(a.item_emb, b.item_emb)


def _toy_split():
    # 2 users, 3 items; user "a" only consumed item 0 in train
    inters = [
        Interaction("a", "i0", 1), Interaction("a", "i0b", 2), Interaction("a", "i0c", 3),
        Interaction("b", "i1", 1), Interaction("b", "i2", 2), Interaction("b", "i0", 3),
    ]
    from lidu.data import leave_one_out

    return leave_one_out(inters)


def _bigger_split(rng, n_users=30, n_items=20, per_user=6):
    inters = []
    for u in range(n_users):
        items = rng.choice(n_items, size=per_user, replace=False)
        for t, i in enumerate(items):
            inters.append(Interaction(f"u{u}", f"i{i}", t))
    from lidu.data import leave_one_out

    return leave_one_out(inters)


class TestTrainBpr:
    def test_learns_consumed_item(self):
        rng = np.random.default_rng(1)
        split = _bigger_split(rng)
        cfg = TrainConfig(max_epochs=60, patience=20, d=8, seed=0, eval_k=20)
        model = train_bpr(split, cfg)
        # train positives should outscore unobserved items on average
        by_user = split.train_by_user()
        margins = []
        for user, inters in by_user.items():
            pos = {it.item_id for it in inters}
            pos_scores = [score(model, user, i) for i in pos]
            neg_scores = [score(model, user, i) for i in model.item_ids if i not in pos]
            margins.append(np.mean(pos_scores) - np.mean(neg_scores))
        assert np.mean(margins) > 0.1

    def test_l2_shrinks_norms(self):
        rng = np.random.default_rng(2)
        split = _bigger_split(rng)
        small = train_bpr(split, TrainConfig(max_epochs=15, d=4, seed=0, l2=0.0))
        big = train_bpr(split, TrainConfig(max_epochs=15, d=4, seed=0, l2=1e3))
        assert np.linalg.norm(big.user_emb) < np.linalg.norm(small.user_emb)

    def test_deterministic(self):
        split = _toy_split()
        cfg = TrainConfig(max_epochs=10, d=3, seed=5, eval_k=10)
        a = train_bpr(split, cfg)
        b = train_bpr(split, cfg)
        np.testing.assert_array_equal(a.user_emb, b.user_emb)
        np.testing.assert_array_equal(a.item_emb, b.item_emb)


class TestTrainGaussianNll:
    def test_frozen_mean_optimal_variance(self):
        # with the mean tower frozen the NLL optimum is variance = residual^2
        rng = np.random.default_rng(3)
        base = init_model(list(range(4)), list(range(5)), 8, 0, variance_tower=True)
        triples = []
        for i in range(4):
            for j in range(5):
                resid = rng.uniform(0.2, 1.5) * rng.choice([-1.0, 1.0])
                z = float(base.user_emb[i] @ base.item_emb[j]) + resid
                triples.append((i, j, z))
        cfg = TrainConfig(learning_rate=0.05, batch_size=4, max_epochs=4000,
                          patience=4000, d=8, seed=0)
        model = train_gaussian_nll(triples, cfg, triples, freeze_mean=True, init=base)
        np.testing.assert_array_equal(model.user_emb, base.user_emb)
        rel_errors = []
        for i, j, z in triples:
            resid2 = (float(model.user_emb[i] @ model.item_emb[j]) - z) ** 2
            var = math.exp(
                float(np.clip(model.user_emb2[i] @ model.item_emb2[j], -10, 10))
            )
            rel_errors.append(abs(var - resid2) / (resid2 + 1e-6))
        assert float(np.median(rel_errors)) <= 0.1

    def test_mean_tower_matches_score(self):
        cfg = TrainConfig(max_epochs=30, d=2, seed=0)
        triples = [(0, 0, 1.0), (0, 1, 0.5), (1, 0, -0.5), (1, 1, 0.2)]
        model = train_gaussian_nll(triples, cfg, triples)
        assert abs(score(model, 0, 0) - float(model.user_emb[0] @ model.item_emb[0])) == 0.0

    def test_deterministic(self):
        triples = [(0, 0, 1.0), (0, 1, 0.5), (1, 0, -0.5), (1, 1, 0.2)]
        cfg = TrainConfig(max_epochs=15, d=2, seed=9)
        a = train_gaussian_nll(triples, cfg, triples)
        b = train_gaussian_nll(triples, cfg, triples)
        np.testing.assert_array_equal(a.user_emb2, b.user_emb2)


class TestUserMeanLoss:
    def test_zero_residual_mse(self):
        split = _toy_split()
        model = init_model(sorted({it.user_id for it in split.train}),
                           sorted({it.item_id for it in split.train + split.valid + split.test}),
                           2, 0)
        # force exact fits: set every rating to the model's own prediction
        split.train = [
            Interaction(it.user_id, it.item_id, it.timestamp, score(model, it.user_id, it.item_id))
            for it in split.train
        ]
        assert user_mean_loss(model, split, "a") == 0.0

    def test_zero_embedding_bpr(self):
        split = _toy_split()
        users = sorted({it.user_id for it in split.train})
        items = sorted({it.item_id for part in (split.train, split.valid, split.test) for it in part})
        model = MfModel(users, items, np.zeros((len(users), 2)), np.zeros((len(items), 2)), kind="bpr")
        assert abs(user_mean_loss(model, split, "a") - math.log(2.0)) < 1e-12

    def test_deterministic_across_calls(self):
        split = _toy_split()
        cfg = TrainConfig(max_epochs=5, d=2, seed=0)
        model = train_bpr(split, cfg)
        assert user_mean_loss(model, split, "b", eval_seed=3) == user_mean_loss(
            model, split, "b", eval_seed=3
        )

    def test_unknown_user(self):
        split = _toy_split()
        cfg = TrainConfig(max_epochs=2, d=2, seed=0)
        model = train_bpr(split, cfg)
        with pytest.raises(ValidationError):
            user_mean_loss(model, split, "nobody")


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = init_model(["u1", "u2"], ["a", "b", "c"], 4, 11, kind="bpr")
        path = tmp_path / "model.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind == "bpr"
        assert loaded.user_ids == model.user_ids
        assert loaded.item_ids == model.item_ids
        np.testing.assert_array_equal(loaded.user_emb, model.user_emb)
        np.testing.assert_array_equal(loaded.item_emb, model.item_emb)

    def test_round_trip_with_towers(self, tmp_path):
        model = init_model([0, 1], [0, 1], 3, 2, kind="gaussian", variance_tower=True)
        path = tmp_path / "model.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.user_emb2, model.user_emb2)
        assert loaded.item_ids == [0, 1]
