"""Label-free ranking-quality baselines: score statistics and a similarity
graph over the top items.

NQC and SMV look only at the top-N score vector. The original retrieval
formulations normalize by a corpus score and assume positive scores;
neither carries over to recommendation (dot-product scores can be negative
and there is no corpus), so NQC drops the normalization and SMV shifts the
scores to a positive range first. W-Graph builds a complete cosine
similarity graph over the top items, prunes weak edges, and summarizes the
remainder with one of four weighted graph statistics.

These estimators rise with predicted quality, the opposite orientation of
an uncertainty; callers negate them (``negate_for_comparison``) before
feeding the shared evaluation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RankedPrediction, ValidationError

WGRAPH_VARIANTS = ("WACC", "WADC", "WAND", "WD")


@dataclass(frozen=True)
class TopNScores:
    """Mean scores of the top-N items, descending, with aligned ids."""

    scores: np.ndarray
    item_ids: tuple

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        ids = tuple(self.item_ids)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "item_ids", ids)
        if arr.ndim != 1 or arr.size < 2:
            raise ValidationError("need at least 2 top scores")
        if len(ids) != arr.size:
            raise ValidationError("item_ids must align with scores")
        if np.any(np.diff(arr) > 0):
            raise ValidationError("scores must be non-increasing")

    @classmethod
    def from_ranked_prediction(cls, pred: RankedPrediction, n: int):
        return cls(pred.means[:n], tuple(pred.item_ids[:n].tolist()))

    def __len__(self):
        return int(self.scores.size)


def nqc(top: TopNScores) -> float:
    """Population standard deviation of the top-N scores."""
    return float(np.std(top.scores))


def smv(top: TopNScores) -> float:
    """Score magnitude and variance: mean of s * |ln(s / mean)|.

    Scores are shifted by (1 - min) whenever the minimum is <= 0 so every
    logarithm is defined (post-shift minimum is exactly 1).
    """
    s = top.scores
    lo = float(s.min())
    if lo <= 0.0:
        s = s + (1.0 - lo)
    mu = float(s.mean())
    return float(np.mean(s * np.abs(np.log(s / mu))))


def _cosine_weights(vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity clamped to [0, 1]; zero-norm rows count
    as orthogonal to everything."""
    norms = np.linalg.norm(vectors, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vectors / safe[:, None]
    w = np.clip(unit @ unit.T, 0.0, 1.0)
    np.fill_diagonal(w, 0.0)
    return w


def wgraph(top_items, item_emb: np.ndarray, variant: str, prune_quantile: float = 0.5) -> float:
    """Weighted-graph estimator over the top items' embedding similarities.

    Builds the complete graph with cosine weights clamped to [0, 1], prunes
    edges strictly below the ``prune_quantile`` weight (default: the
    median), and returns the requested statistic:

    * WD: mean weighted degree.
    * WADC: mean weighted degree centrality, i.e. degree / (N - 1).
    * WAND: mean over nodes of the average weighted degree of neighbors
      (isolated nodes contribute 0).
    * WACC: mean weighted clustering coefficient with geometric-mean
      triangle weights, normalized by the maximum surviving weight.

    A graph with no surviving structure yields 0 for every variant.
    """
    if variant not in WGRAPH_VARIANTS:
        raise ValidationError(f"variant must be one of {WGRAPH_VARIANTS}, got {variant!r}")
    rows = np.asarray(top_items, dtype=np.int64)
    if rows.size < 2:
        raise ValidationError("W-Graph needs at least 2 items")
    n = rows.size
    w = _cosine_weights(np.asarray(item_emb, dtype=np.float64)[rows])
    iu = np.triu_indices(n, k=1)
    threshold = float(np.quantile(w[iu], prune_quantile))
    adj = w >= threshold
    np.fill_diagonal(adj, False)
    weights = np.where(adj, w, 0.0)
    strength = weights.sum(axis=1)

    if variant == "WD":
        return float(strength.mean())
    if variant == "WADC":
        return float(strength.mean() / (n - 1))
    if variant == "WAND":
        neighbor_counts = adj.sum(axis=1)
        sums = adj @ strength
        per_node = np.where(neighbor_counts > 0, sums / np.maximum(neighbor_counts, 1), 0.0)
        return float(per_node.mean())
    # WACC
    w_max = float(weights.max())
    if w_max == 0.0:
        return 0.0
    cube = np.cbrt(weights / w_max)
    tri = np.diagonal(cube @ cube @ cube)
    k = adj.sum(axis=1)
    denom = k * (k - 1)
    coeff = np.where(denom > 0, tri / np.maximum(denom, 1), 0.0)
    return float(coeff.mean())


def wgraph_all(top_items, item_emb, prune_quantile: float = 0.5) -> dict:
    """All four W-Graph statistics at once (shared graph construction)."""
    return {
        v: wgraph(top_items, item_emb, v, prune_quantile) for v in WGRAPH_VARIANTS
    }


def negate_for_comparison(values):
    """Elementwise negation, flipping quality estimators into the shared
    "higher = worse predicted performance" orientation."""
    return [-v for v in values]
