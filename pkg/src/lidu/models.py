"""Desk-scale dual-tower matrix factorization models and trainers.

Three trainers share the same Adam optimizer and early-stopping loop:

* ``train_mse``: squared error on observed (row, col, value) triples.
* ``train_bpr``: pairwise logistic loss on implicit feedback with one
  uniformly sampled unobserved negative per positive per epoch; early
  stopping tracks validation NDCG.
* ``train_gaussian_nll``: joint mean and log-variance towers under the
  Gaussian negative log likelihood, whose optimum sets the predicted
  variance equal to the squared residual.

All loss gradients are analytic (and finite-difference checked in the test
suite) and all randomness flows from seeded generators, so two runs with
the same config and data produce bit-identical embeddings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import DatasetSplit, TrainingError, ValidationError

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0
_LOG_2PI = math.log(2.0 * math.pi)

INIT_STD = 0.1


@dataclass
class MfModel:
    """Two embedding matrices plus optional variance towers.

    ``user_ids`` and ``item_ids`` map row indices to external identifiers;
    the inverse maps are built on construction and must be bijections.
    ``kind`` records the training objective ("mse", "bpr" or "gaussian").
    """

    user_ids: list
    item_ids: list
    user_emb: np.ndarray
    item_emb: np.ndarray
    user_emb2: np.ndarray | None = None
    item_emb2: np.ndarray | None = None
    kind: str = "mse"
    user_index: dict = field(init=False, repr=False)
    item_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.user_ids = list(self.user_ids)
        self.item_ids = list(self.item_ids)
        self.user_emb = np.asarray(self.user_emb, dtype=np.float64)
        self.item_emb = np.asarray(self.item_emb, dtype=np.float64)
        if self.user_emb.shape != (len(self.user_ids), self.d):
            raise ValidationError("user_emb shape does not match user_ids")
        if self.item_emb.shape != (len(self.item_ids), self.d):
            raise ValidationError("item_emb shape does not match item_ids")
        for name in ("user_emb2", "item_emb2"):
            tower = getattr(self, name)
            if tower is not None:
                setattr(self, name, np.asarray(tower, dtype=np.float64))
        towers = [t for t in (self.user_emb, self.item_emb, self.user_emb2, self.item_emb2) if t is not None]
        if not all(np.all(np.isfinite(t)) for t in towers):
            raise ValidationError("embedding matrices must be finite")
        self.user_index = {u: r for r, u in enumerate(self.user_ids)}
        self.item_index = {i: r for r, i in enumerate(self.item_ids)}
        if len(self.user_index) != len(self.user_ids) or len(self.item_index) != len(self.item_ids):
            raise ValidationError("id maps must be bijections onto row indices")

    @property
    def d(self) -> int:
        return int(self.user_emb.shape[1])

    @property
    def has_variance_tower(self) -> bool:
        return self.user_emb2 is not None and self.item_emb2 is not None

    def user_row(self, user) -> int:
        try:
            return self.user_index[user]
        except KeyError:
            raise ValidationError(f"unknown user id {user!r}") from None

    def item_row(self, item) -> int:
        try:
            return self.item_index[item]
        except KeyError:
            raise ValidationError(f"unknown item id {item!r}") from None


@dataclass(frozen=True)
class TrainConfig:
    """Shared trainer hyperparameters.

    ``patience`` counts epochs without validation improvement before early
    stopping; ``eval_k`` is the NDCG cutoff used by the BPR stopper. ``l2``
    only enters the BPR objective.
    """

    learning_rate: float = 0.01
    batch_size: int = 32
    patience: int = 10
    max_epochs: int = 200
    seed: int = 0
    l2: float = 0.0
    d: int = 64
    eval_k: int = 1000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0 or self.d < 1:
            raise ValidationError("batch_size, max_epochs and d must be positive")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")


def init_model(user_ids, item_ids, d, seed, kind="mse", variance_tower=False) -> MfModel:
    """Gaussian(0, 0.1^2) initialization of all towers, seeded."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    n_u, n_i = len(user_ids), len(item_ids)
    user_emb = rng.normal(0.0, INIT_STD, (n_u, d))
    item_emb = rng.normal(0.0, INIT_STD, (n_i, d))
    user_emb2 = item_emb2 = None
    if variance_tower:
        user_emb2 = rng.normal(0.0, INIT_STD, (n_u, d))
        item_emb2 = rng.normal(0.0, INIT_STD, (n_i, d))
    return MfModel(user_ids, item_ids, user_emb, item_emb, user_emb2, item_emb2, kind)


def score(model: MfModel, user, item) -> float:
    """Dot product of the user and item embedding rows."""
    return float(model.user_emb[model.user_row(user)] @ model.item_emb[model.item_row(item)])


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# Loss functions with analytic gradients (finite-difference checked in tests)
# ---------------------------------------------------------------------------

def mse_loss_and_grads(user_emb, item_emb, u_idx, i_idx, z):
    """Sum of squared errors over the given triples and its gradients."""
    xu = user_emb[u_idx]
    yi = item_emb[i_idx]
    err = np.einsum("ij,ij->i", xu, yi) - z
    loss = float(err @ err)
    g_user = np.zeros_like(user_emb)
    g_item = np.zeros_like(item_emb)
    np.add.at(g_user, u_idx, (2.0 * err)[:, None] * yi)
    np.add.at(g_item, i_idx, (2.0 * err)[:, None] * xu)
    return loss, g_user, g_item


def bpr_loss_and_grads(user_emb, item_emb, u_idx, pos_idx, neg_idx, l2=0.0):
    """Pairwise logistic loss -sum log sigmoid(s_pos - s_neg) + l2 penalty."""
    xu = user_emb[u_idx]
    yp = item_emb[pos_idx]
    yn = item_emb[neg_idx]
    diff = np.einsum("ij,ij->i", xu, yp - yn)
    loss = float(np.logaddexp(0.0, -diff).sum())
    coef = -expit(-diff)
    g_user = np.zeros_like(user_emb)
    g_item = np.zeros_like(item_emb)
    np.add.at(g_user, u_idx, coef[:, None] * (yp - yn))
    np.add.at(g_item, pos_idx, coef[:, None] * xu)
    np.add.at(g_item, neg_idx, -coef[:, None] * xu)
    if l2 > 0.0:
        loss += l2 * (float((user_emb * user_emb).sum()) + float((item_emb * item_emb).sum()))
        g_user += 2.0 * l2 * user_emb
        g_item += 2.0 * l2 * item_emb
    return loss, g_user, g_item


def gaussian_nll_loss_and_grads(user_emb, item_emb, user_emb2, item_emb2, u_idx, i_idx, z):
    """Gaussian NLL with a factorized log-variance head.

    For each triple: (pred - z)^2 / (2 var) + 0.5 log(2 pi var), where
    log var is the second-tower dot product clamped to [-10, 10]. The
    clamp zeroes the variance gradient outside the interval.
    """
    xu = user_emb[u_idx]
    yi = item_emb[i_idx]
    xu2 = user_emb2[u_idx]
    yi2 = item_emb2[i_idx]
    pred = np.einsum("ij,ij->i", xu, yi)
    raw = np.einsum("ij,ij->i", xu2, yi2)
    logv = np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)
    var = np.exp(logv)
    resid = pred - z
    loss = float((resid * resid / (2.0 * var) + 0.5 * (logv + _LOG_2PI)).sum())
    d_pred = resid / var
    d_logv = 0.5 - resid * resid / (2.0 * var)
    d_logv = np.where((raw < LOGVAR_MIN) | (raw > LOGVAR_MAX), 0.0, d_logv)
    g_user = np.zeros_like(user_emb)
    g_item = np.zeros_like(item_emb)
    g_user2 = np.zeros_like(user_emb2)
    g_item2 = np.zeros_like(item_emb2)
    np.add.at(g_user, u_idx, d_pred[:, None] * yi)
    np.add.at(g_item, i_idx, d_pred[:, None] * xu)
    np.add.at(g_user2, u_idx, d_logv[:, None] * yi2)
    np.add.at(g_item2, i_idx, d_logv[:, None] * xu2)
    return loss, g_user, g_item, g_user2, g_item2


# ---------------------------------------------------------------------------
# Trainers
# ---------------------------------------------------------------------------

def _as_triples(data):
    arr = np.asarray(list(data) if not isinstance(data, np.ndarray) else data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise ValidationError("expected a nonempty sequence of (row, col, value) triples")
    return arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]


def _batches(n, batch_size, perm):
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def train_mse(data, cfg: TrainConfig, valid, *, n_rows=None, n_cols=None) -> MfModel:
    """Adam-optimized MSE factorization of observed triples.

    Early stops once validation MSE has not improved for ``cfg.patience``
    epochs and returns the best-validation checkpoint. ``max_epochs = 0``
    returns the seeded initialization unchanged. ``n_rows``/``n_cols``
    override the matrix shape when some rows or columns are unobserved.
    """
    tr_u, tr_i, tr_z = _as_triples(data)
    va_u, va_i, va_z = _as_triples(valid)
    if n_rows is None:
        n_rows = int(max(tr_u.max(), va_u.max())) + 1
    if n_cols is None:
        n_cols = int(max(tr_i.max(), va_i.max())) + 1
    model = init_model(list(range(n_rows)), list(range(n_cols)), cfg.d, cfg.seed, kind="mse")
    U, I = model.user_emb, model.item_emb
    opt = Adam([U, I], cfg.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    def valid_mse():
        err = np.einsum("ij,ij->i", U[va_u], I[va_i]) - va_z
        return float((err * err).mean())

    best = (valid_mse(), U.copy(), I.copy())
    bad_epochs = 0
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(tr_u.size)
        epoch_loss = 0.0
        for b in _batches(tr_u.size, cfg.batch_size, perm):
            loss, gu, gi = mse_loss_and_grads(U, I, tr_u[b], tr_i[b], tr_z[b])
            epoch_loss += loss
            opt.step([gu, gi])
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"MSE training diverged at epoch {epoch}")
        vm = valid_mse()
        if vm < best[0]:
            best = (vm, U.copy(), I.copy())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return MfModel(model.user_ids, model.item_ids, best[1], best[2], kind="mse")


def _sample_negatives(pos_sets, pos_u, n_items, rng):
    neg = rng.integers(0, n_items, size=pos_u.size)
    for k in range(pos_u.size):
        taken = pos_sets[pos_u[k]]
        while neg[k] in taken:
            neg[k] = rng.integers(0, n_items)
    return neg


def _bpr_index(split: DatasetSplit):
    """Index maps and positive/validation arrays for implicit training."""
    users = sorted({it.user_id for it in split.train})
    items = sorted({it.item_id for part in (split.train, split.valid, split.test) for it in part})
    u_of = {u: r for r, u in enumerate(users)}
    i_of = {i: r for r, i in enumerate(items)}
    pos_u = np.array([u_of[it.user_id] for it in split.train], dtype=np.int64)
    pos_i = np.array([i_of[it.item_id] for it in split.train], dtype=np.int64)
    pos_sets = {}
    for u, i in zip(pos_u, pos_i):
        pos_sets.setdefault(int(u), set()).add(int(i))
    pos_sets = {u: frozenset(s) for u, s in pos_sets.items()}
    va_u = np.array([u_of[it.user_id] for it in split.valid], dtype=np.int64)
    va_i = np.array([i_of[it.item_id] for it in split.valid], dtype=np.int64)
    return users, items, pos_u, pos_i, pos_sets, va_u, va_i


def _holdout_ndcg(U, I, va_u, va_i, mask_rows, mask_cols, k):
    """Mean NDCG of one held-out item per user, ranked against all items
    minus the user's masked (seen) ones; ties break by ascending column."""
    S = U[va_u] @ I.T
    if mask_rows.size:
        S[mask_rows, mask_cols] = -np.inf
    t = S[np.arange(va_u.size), va_i]
    greater = (S > t[:, None]).sum(axis=1)
    cols = np.arange(I.shape[0])
    tie_before = ((S == t[:, None]) & (cols[None, :] < va_i[:, None])).sum(axis=1)
    rank = 1 + greater + tie_before
    gains = np.where(rank <= k, 1.0 / np.log2(rank + 1.0), 0.0)
    return float(gains.mean()), rank


def train_bpr(data: DatasetSplit, cfg: TrainConfig) -> MfModel:
    """BPR matrix factorization on an implicit-feedback split.

    One uniformly sampled unobserved negative per positive per epoch; early
    stopping tracks NDCG@``cfg.eval_k`` of the held-out validation item
    (strict increase resets the patience counter) and the best checkpoint
    is returned.
    """
    if not data.train or not data.valid:
        raise ValidationError("BPR training needs nonempty train and valid sets")
    users, items, pos_u, pos_i, pos_sets, va_u, va_i = _bpr_index(data)
    n_items = len(items)
    full = frozenset(range(n_items))
    keep = np.array([pos_sets[int(u)] != full for u in pos_u])
    if not keep.all():
        skipped = {users[int(u)] for u in pos_u[~keep]}
        warnings.warn(f"skipping {len(skipped)} user(s) with no unobserved items to sample")
        pos_u, pos_i = pos_u[keep], pos_i[keep]
    if pos_u.size == 0:
        raise ValidationError("no trainable positives remain")

    # mask each validation user's train items out of the candidate ranking
    mask_rows = []
    mask_cols = []
    row_of_valid_user = {int(u): r for r, u in enumerate(va_u)}
    for u, i in zip(pos_u, pos_i):
        r = row_of_valid_user.get(int(u))
        if r is not None:
            mask_rows.append(r)
            mask_cols.append(int(i))
    mask_rows = np.array(mask_rows, dtype=np.int64)
    mask_cols = np.array(mask_cols, dtype=np.int64)

    model = init_model(users, items, cfg.d, cfg.seed, kind="bpr")
    U, I = model.user_emb, model.item_emb
    opt = Adam([U, I], cfg.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    k = min(cfg.eval_k, n_items)
    m = pos_u.size

    best_ndcg, _ = _holdout_ndcg(U, I, va_u, va_i, mask_rows, mask_cols, k)
    best = (best_ndcg, U.copy(), I.copy())
    bad_epochs = 0
    for epoch in range(cfg.max_epochs):
        neg_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, epoch]))
        neg_i = _sample_negatives(pos_sets, pos_u, n_items, neg_rng)
        perm = rng.permutation(m)
        epoch_loss = 0.0
        for b in _batches(m, cfg.batch_size, perm):
            loss, gu, gi = bpr_loss_and_grads(
                U, I, pos_u[b], pos_i[b], neg_i[b], l2=cfg.l2 * b.size / m
            )
            epoch_loss += loss
            opt.step([gu, gi])
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"BPR training diverged at epoch {epoch}")
        ndcg, _ = _holdout_ndcg(U, I, va_u, va_i, mask_rows, mask_cols, k)
        if ndcg > best[0]:
            best = (ndcg, U.copy(), I.copy())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return MfModel(users, items, best[1], best[2], kind="bpr")


def train_gaussian_nll(data, cfg: TrainConfig, valid, *, freeze_mean=False, init=None,
                       n_rows=None, n_cols=None) -> MfModel:
    """Joint optimization of mean and log-variance towers under the NLL.

    Early stops on validation NLL. ``freeze_mean`` keeps the mean tower at
    its initial values and only fits the variance head; ``init`` supplies a
    starting model (copied, never mutated) instead of a fresh one.
    """
    tr_u, tr_i, tr_z = _as_triples(data)
    va_u, va_i, va_z = _as_triples(valid)
    if init is None:
        if n_rows is None:
            n_rows = int(max(tr_u.max(), va_u.max())) + 1
        if n_cols is None:
            n_cols = int(max(tr_i.max(), va_i.max())) + 1
        model = init_model(
            list(range(n_rows)), list(range(n_cols)), cfg.d, cfg.seed,
            kind="gaussian", variance_tower=True,
        )
    else:
        if not init.has_variance_tower:
            raise ValidationError("init model lacks variance towers")
        model = MfModel(
            init.user_ids, init.item_ids,
            init.user_emb.copy(), init.item_emb.copy(),
            init.user_emb2.copy(), init.item_emb2.copy(),
            kind="gaussian",
        )
    U, I, U2, I2 = model.user_emb, model.item_emb, model.user_emb2, model.item_emb2
    params = [U2, I2] if freeze_mean else [U, I, U2, I2]
    opt = Adam(params, cfg.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    def valid_nll():
        loss, *_ = gaussian_nll_loss_and_grads(U, I, U2, I2, va_u, va_i, va_z)
        return loss / va_u.size

    best = (valid_nll(), U.copy(), I.copy(), U2.copy(), I2.copy())
    bad_epochs = 0
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(tr_u.size)
        epoch_loss = 0.0
        for b in _batches(tr_u.size, cfg.batch_size, perm):
            loss, gu, gi, gu2, gi2 = gaussian_nll_loss_and_grads(
                U, I, U2, I2, tr_u[b], tr_i[b], tr_z[b]
            )
            epoch_loss += loss
            opt.step([gu2, gi2] if freeze_mean else [gu, gi, gu2, gi2])
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"Gaussian NLL training diverged at epoch {epoch}")
        vn = valid_nll()
        if vn < best[0]:
            best = (vn, U.copy(), I.copy(), U2.copy(), I2.copy())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return MfModel(model.user_ids, model.item_ids, best[1], best[2], best[3], best[4], kind="gaussian")


def train_gaussian_nll_implicit(data: DatasetSplit, cfg: TrainConfig) -> MfModel:
    """Gaussian-head model for implicit feedback.

    Positives regress to 1 and one freshly sampled unobserved negative per
    positive per epoch regresses to 0, both under the NLL, so the variance
    head learns per-pair predictive spread while the mean tower learns a
    propensity score. Early stopping tracks validation NDCG of the mean
    tower, mirroring the BPR stopper.
    """
    if not data.train or not data.valid:
        raise ValidationError("training needs nonempty train and valid sets")
    users, items, pos_u, pos_i, pos_sets, va_u, va_i = _bpr_index(data)
    n_items = len(items)
    mask_rows = []
    mask_cols = []
    row_of_valid_user = {int(u): r for r, u in enumerate(va_u)}
    for u, i in zip(pos_u, pos_i):
        r = row_of_valid_user.get(int(u))
        if r is not None:
            mask_rows.append(r)
            mask_cols.append(int(i))
    mask_rows = np.array(mask_rows, dtype=np.int64)
    mask_cols = np.array(mask_cols, dtype=np.int64)

    model = init_model(users, items, cfg.d, cfg.seed, kind="gaussian", variance_tower=True)
    U, I, U2, I2 = model.user_emb, model.item_emb, model.user_emb2, model.item_emb2
    opt = Adam([U, I, U2, I2], cfg.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    k = min(cfg.eval_k, n_items)
    m = pos_u.size

    best_ndcg, _ = _holdout_ndcg(U, I, va_u, va_i, mask_rows, mask_cols, k)
    best = (best_ndcg, U.copy(), I.copy(), U2.copy(), I2.copy())
    bad_epochs = 0
    ones = np.ones(m)
    for epoch in range(cfg.max_epochs):
        neg_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, epoch]))
        neg_i = _sample_negatives(pos_sets, pos_u, n_items, neg_rng)
        all_u = np.concatenate([pos_u, pos_u])
        all_i = np.concatenate([pos_i, neg_i])
        all_z = np.concatenate([ones, np.zeros(m)])
        perm = rng.permutation(2 * m)
        epoch_loss = 0.0
        for b in _batches(2 * m, cfg.batch_size, perm):
            loss, gu, gi, gu2, gi2 = gaussian_nll_loss_and_grads(
                U, I, U2, I2, all_u[b], all_i[b], all_z[b]
            )
            epoch_loss += loss
            opt.step([gu, gi, gu2, gi2])
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"implicit Gaussian NLL training diverged at epoch {epoch}")
        ndcg, _ = _holdout_ndcg(U, I, va_u, va_i, mask_rows, mask_cols, k)
        if ndcg > best[0]:
            best = (ndcg, U.copy(), I.copy(), U2.copy(), I2.copy())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return MfModel(users, items, best[1], best[2], best[3], best[4], kind="gaussian")


def user_mean_loss(model: MfModel, data: DatasetSplit, user, eval_seed: int = 0) -> float:
    """Mean per-interaction training loss of one user under the model's own
    objective. BPR negatives are drawn with a generator seeded from
    (eval_seed, user row), so repeated calls agree."""
    by_user = data.train_by_user()
    if user not in by_user:
        raise ValidationError(f"user {user!r} has no training interactions")
    inters = by_user[user]
    u = model.user_row(user)
    if model.kind == "bpr":
        item_rows = np.array([model.item_row(it.item_id) for it in inters], dtype=np.int64)
        taken = set(int(i) for i in item_rows)
        n_items = len(model.item_ids)
        if len(taken) >= n_items:
            raise ValidationError(f"user {user!r} interacted with every item; no negatives exist")
        rng = np.random.default_rng(np.random.SeedSequence([eval_seed, 3, u]))
        neg = np.empty(item_rows.size, dtype=np.int64)
        for k in range(item_rows.size):
            cand = int(rng.integers(0, n_items))
            while cand in taken:
                cand = int(rng.integers(0, n_items))
            neg[k] = cand
        diff = (model.user_emb[u] * (model.item_emb[item_rows] - model.item_emb[neg])).sum(axis=1)
        return float(np.logaddexp(0.0, -diff).mean())
    # rating-target objectives
    ratings = [it.rating for it in inters]
    if any(r is None for r in ratings):
        raise ValidationError(f"user {user!r} has interactions without ratings")
    z = np.asarray(ratings, dtype=np.float64)
    item_rows = np.array([model.item_row(it.item_id) for it in inters], dtype=np.int64)
    pred = model.item_emb[item_rows] @ model.user_emb[u]
    if model.kind == "gaussian":
        if not model.has_variance_tower:
            raise ValidationError("gaussian model lacks variance towers")
        raw = model.item_emb2[item_rows] @ model.user_emb2[u]
        logv = np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)
        var = np.exp(logv)
        terms = (pred - z) ** 2 / (2.0 * var) + 0.5 * (logv + _LOG_2PI)
        return float(terms.mean())
    err = pred - z
    return float((err * err).mean())


# ---------------------------------------------------------------------------
# Checkpoint container (versioned npz; round trips are bit exact)
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_model(model: MfModel, path) -> None:
    arrays = {
        "version": np.int64(CHECKPOINT_VERSION),
        "kind": np.str_(model.kind),
        "user_ids": np.asarray(model.user_ids),
        "item_ids": np.asarray(model.item_ids),
        "user_emb": model.user_emb,
        "item_emb": model.item_emb,
    }
    if model.has_variance_tower:
        arrays["user_emb2"] = model.user_emb2
        arrays["item_emb2"] = model.item_emb2
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> MfModel:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version}")
        return MfModel(
            data["user_ids"].tolist(),
            data["item_ids"].tolist(),
            data["user_emb"],
            data["item_emb"],
            data["user_emb2"] if "user_emb2" in data else None,
            data["item_emb2"] if "item_emb2" in data else None,
            kind=str(data["kind"][()]),
        )
