"""List distribution uncertainty: pairwise ranking probabilities, full list
probability, and the top-N variant with a step function and position bias.

Score differences between two items with independent Gaussian scores are
Gaussian again, so the probability that item a outranks item b is

    pi(a, b) = Phi((mean_a - mean_b) / sqrt(var_a + var_b)).

The probability of generating a specific ranking multiplies pi over ordered
pairs, and the uncertainty is the negative log of that product. The top-N
variant restricts each rank n to comparisons against ranks j >= s_n where
s_n = high_bit(n) + n, and discounts rank n's contribution by
1 / log2(n + 1), so perturbations deep in the list cannot dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .core import LiduConfig, RankedPrediction, ScoreDistribution, ValidationError

# Backstop before taking logs: keeps the uncertainty finite when a pairwise
# probability underflows (zero variances or huge mean gaps).
PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class LiduValue:
    """Uncertainty of a ranked list, in nats, with the pair count used."""

    value: float
    n_pairs_used: int

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValidationError(f"LiDu value must be finite and >= 0, got {self.value}")
        if self.n_pairs_used < 0:
            raise ValidationError("n_pairs_used must be >= 0")


def pairwise_prob(a: ScoreDistribution, b: ScoreDistribution) -> float:
    """Probability that item a ranks above item b.

    Degenerate rule when both variances are zero: 1 if a's mean is larger,
    0 if smaller, 0.5 on an exact tie.
    """
    gap = a.mean - b.mean
    total_var = a.variance + b.variance
    if total_var == 0.0:
        if gap > 0:
            return 1.0
        if gap < 0:
            return 0.0
        return 0.5
    return float(ndtr(gap / math.sqrt(total_var)))


def _pairwise_prob_arrays(mean_a, mean_b, var_a, var_b):
    """Vectorized pairwise_prob over aligned arrays."""
    gap = mean_a - mean_b
    total_var = var_a + var_b
    degenerate = total_var == 0.0
    safe_var = np.where(degenerate, 1.0, total_var)
    pi = ndtr(gap / np.sqrt(safe_var))
    if np.any(degenerate):
        step = np.where(gap > 0, 1.0, np.where(gap < 0, 0.0, 0.5))
        pi = np.where(degenerate, step, pi)
    return pi


def _neg_log_probs(pred: RankedPrediction, idx_a, idx_b):
    pi = _pairwise_prob_arrays(
        pred.means[idx_a], pred.means[idx_b], pred.variances[idx_a], pred.variances[idx_b]
    )
    return -np.log(np.clip(pi, PROB_FLOOR, 1.0))


def list_log_prob(pred: RankedPrediction, k: int) -> float:
    """Log probability of generating the first k ranks of ``pred``.

    Sums log pi(n, j) over n = 1..k and all j > n up to the full list
    length; each pi is clamped to [PROB_FLOOR, 1] before the log. A length
    one list (or any empty pair set) yields 0, the empty product.
    """
    n_items = len(pred)
    if not 1 <= k <= n_items:
        raise ValidationError(f"k must be in [1, {n_items}], got {k}")
    rows, cols = np.triu_indices(n_items, k=1)
    keep = rows < k
    rows, cols = rows[keep], cols[keep]
    if rows.size == 0:
        return 0.0
    return float(-_neg_log_probs(pred, rows, cols).sum())


def lidu_full(pred: RankedPrediction, k: int) -> LiduValue:
    """Full-list uncertainty: the negative log list probability."""
    n_items = len(pred)
    value = -list_log_prob(pred, k)
    n_pairs = k * n_items - k * (k + 1) // 2
    return LiduValue(value + 0.0, n_pairs)


def step_index(n: int) -> int:
    """First rank that rank n is compared against: high_bit(n) + n, where
    high_bit(n) is the largest power of two not exceeding n."""
    if n < 1:
        raise ValidationError(f"rank must be >= 1, got {n}")
    return (1 << (n.bit_length() - 1)) + n


def position_weight(n: int) -> float:
    """Discount weight of rank n: log2(n + 1), so rank 1 has weight 1."""
    if n < 1:
        raise ValidationError(f"rank must be >= 1, got {n}")
    return math.log2(n + 1)


@lru_cache(maxsize=512)
def _topn_pairs(n_top: int, l_max: int, step_fn) -> tuple:
    """Flat (rank position, compared position) index arrays, 0-based."""
    rows, cols = [], []
    for n in range(1, n_top + 1):
        start = step_fn(n)
        if start > l_max:
            continue
        js = np.arange(start, l_max + 1)
        rows.append(np.full(js.size, n, dtype=np.int64))
        cols.append(js)
    if not rows:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    ranks = np.concatenate(rows)
    comps = np.concatenate(cols)
    ranks.setflags(write=False)
    comps.setflags(write=False)
    return ranks, comps


def lidu_topn(
    pred: RankedPrediction,
    cfg: LiduConfig,
    *,
    step_fn=step_index,
    weight_fn=position_weight,
) -> LiduValue:
    """Top-N uncertainty of ``pred`` under ``cfg``.

    value = sum_n (1 / p_n) * sum_{j = s_n}^{L} (-log pi(n, j))

    with s_n from ``step_fn`` and p_n from ``weight_fn``. Ranks whose step
    already exceeds L contribute no pairs, so e.g. N = L = 1 yields 0. With
    ``cfg.literal_position_bias`` the weight divides each probability inside
    the log instead (-log(pi / p_n)), which adds a model-independent offset
    per pair. ``step_fn`` and ``weight_fn`` are test hooks; production use
    keeps the defaults.
    """
    if cfg.l_max > len(pred):
        raise ValidationError(
            f"l_max ({cfg.l_max}) exceeds the {len(pred)} available candidates"
        )
    ranks, comps = _topn_pairs(cfg.n_top, cfg.l_max, step_fn)
    if ranks.size == 0:
        return LiduValue(0.0, 0)
    neg_log = _neg_log_probs(pred, ranks - 1, comps - 1)
    weights = np.array([weight_fn(n) for n in range(1, cfg.n_top + 1)])
    per_pair_w = weights[ranks - 1]
    if cfg.literal_position_bias:
        value = float((neg_log + np.log(per_pair_w)).sum())
    else:
        value = float((neg_log / per_pair_w).sum())
    return LiduValue(max(value, 0.0), int(ranks.size))


def pointwise_uncertainty(pred: RankedPrediction, n_top: int) -> float:
    """Sum of the predictive variances of the top ``n_top`` items.

    The classic list-agnostic uncertainty measure, kept as a comparison
    baseline.
    """
    if not 1 <= n_top <= len(pred):
        raise ValidationError(f"n_top must be in [1, {len(pred)}], got {n_top}")
    return float(pred.variances[:n_top].sum())
