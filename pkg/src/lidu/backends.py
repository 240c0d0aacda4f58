"""Variance backends: turn a trained model into per-item score distributions.

Three routes produce the (mean, variance) pairs that the uncertainty module
consumes: MC dropout over the user embedding, a deep ensemble of
independently trained models, and a Gaussian output head trained with the
NLL objective. All of them reduce samples with the population variance
(divide by T, not T - 1).

Each call owns a generator seeded from (seed, user row), so predictions for
distinct users can run concurrently and still reproduce bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScoreDistribution, ValidationError
from .models import LOGVAR_MAX, LOGVAR_MIN, MfModel


@dataclass(frozen=True)
class SamplePack:
    """Score samples, shape (T passes, M items), T >= 2."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 2:
            raise ValidationError("samples must be a (passes, items) matrix")
        if arr.shape[0] < 2:
            raise ValidationError(f"need at least 2 passes for a variance, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("samples must be finite")


def _moments(samples: np.ndarray):
    return samples.mean(axis=0), samples.var(axis=0)


def _to_distributions(means, variances):
    # var(axis=0) can go a hair negative at zero spread through rounding
    variances = np.maximum(variances, 0.0)
    return [ScoreDistribution(m, v) for m, v in zip(means, variances)]


def variance_from_samples(pack: SamplePack):
    """Per-item mean and population variance of the sample rows."""
    return _to_distributions(*_moments(pack.samples))


def _candidate_rows(model: MfModel, candidates):
    return np.array([model.item_row(i) for i in candidates], dtype=np.int64)


def mc_dropout_scores_rows(model: MfModel, user_row: int, cand_rows: np.ndarray,
                           p: float, t: int, seed: int):
    """Row-index fast path of :func:`mc_dropout_scores`."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"dropout probability must be in (0, 1), got {p}")
    if t < 2:
        raise ValidationError(f"need at least 2 passes, got {t}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 4, int(user_row)]))
    keep = rng.random((t, model.d)) >= p
    masked = (keep * model.user_emb[user_row]) / (1.0 - p)
    samples = masked @ model.item_emb[cand_rows].T
    return _moments(samples)


def mc_dropout_scores(model: MfModel, user, candidates, p: float, t: int, seed: int):
    """(means, variances) arrays from ``t`` dropout passes.

    Per pass an independent Bernoulli(1 - p) mask over the user embedding
    is drawn and kept coordinates are scaled by 1 / (1 - p), so the masked
    embedding is unbiased. Item embeddings are gathered once and shared by
    all passes.
    """
    return mc_dropout_scores_rows(
        model, model.user_row(user), _candidate_rows(model, candidates), p, t, seed
    )


def mc_dropout_predict(model, user, candidates, p, t, seed):
    """MC dropout score distributions for every candidate item."""
    means, variances = mc_dropout_scores(model, user, candidates, p, t, seed)
    return _to_distributions(means, variances)


def _check_ensemble(models):
    models = list(models)
    if len(models) < 2:
        raise ValidationError(f"an ensemble needs >= 2 models, got {len(models)}")
    first = models[0]
    for m in models[1:]:
        if m.user_ids != first.user_ids or m.item_ids != first.item_ids:
            raise ValidationError("ensemble members must share the same id spaces")
    return models


def ensemble_scores_rows(models, user_row: int, cand_rows: np.ndarray):
    """Row-index fast path of :func:`ensemble_scores`."""
    models = _check_ensemble(models)
    samples = np.stack([m.user_emb[user_row] @ m.item_emb[cand_rows].T for m in models])
    return _moments(samples)


def ensemble_scores(models, user, candidates):
    """(means, variances) across one deterministic score per model."""
    models = _check_ensemble(models)
    return ensemble_scores_rows(
        models, models[0].user_row(user), _candidate_rows(models[0], candidates)
    )


def ensemble_predict(models, user, candidates):
    """Score distributions from the diversity of independently trained models."""
    return _to_distributions(*ensemble_scores(models, user, candidates))


def gaussian_head_scores_rows(model: MfModel, user_row: int, cand_rows: np.ndarray):
    """Row-index fast path of :func:`gaussian_head_scores`."""
    if not model.has_variance_tower:
        raise ValidationError("model has no variance towers; train it with the NLL objective")
    means = model.item_emb[cand_rows] @ model.user_emb[user_row]
    raw = model.item_emb2[cand_rows] @ model.user_emb2[user_row]
    variances = np.exp(np.clip(raw, LOGVAR_MIN, LOGVAR_MAX))
    return means, variances


def gaussian_head_scores(model: MfModel, user, candidates):
    """(means, variances) from the trained mean and log-variance towers."""
    return gaussian_head_scores_rows(
        model, model.user_row(user), _candidate_rows(model, candidates)
    )


def gaussian_head_predict(model, user, candidates):
    """Score distributions read directly off the Gaussian output head."""
    return _to_distributions(*gaussian_head_scores(model, user, candidates))
