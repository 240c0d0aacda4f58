"""Beyond-accuracy analyses: interest dynamism, list diversity, and grouped
uncertainty summaries.

Both dissimilarity measures use 1 - cosine similarity of item embeddings,
so they live in [0, 2]; zero-norm embeddings count as orthogonal (distance
1). The grouping helper buckets users into equal-size quantile groups of a
per-user key and reports the mean log-uncertainty per retained group,
which is how the dynamism and diversity trends are visualized.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ValidationError

LIDU_LOG_FLOOR = 1e-12


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    return vectors / np.where(norms > 0, norms, 1.0)[:, None], norms


def interest_dynamism(user_items, item_emb: np.ndarray) -> float:
    """Mean dissimilarity between chronologically adjacent consumed items."""
    rows = np.asarray(user_items, dtype=np.int64)
    if rows.size < 2:
        raise ValidationError("interest dynamism needs at least 2 interactions")
    unit, norms = _unit_rows(np.asarray(item_emb, dtype=np.float64)[rows])
    cos = np.einsum("ij,ij->i", unit[:-1], unit[1:])
    cos = np.where((norms[:-1] == 0) | (norms[1:] == 0), 0.0, cos)
    return float(np.mean(1.0 - cos))


def list_diversity(rec_list, item_emb: np.ndarray) -> float:
    """Mean pairwise dissimilarity over all unordered pairs of a list."""
    rows = np.asarray(rec_list, dtype=np.int64)
    if rows.size < 2:
        raise ValidationError("list diversity needs at least 2 items")
    unit, norms = _unit_rows(np.asarray(item_emb, dtype=np.float64)[rows])
    cos = unit @ unit.T
    zero = norms == 0
    if zero.any():
        cos[zero, :] = 0.0
        cos[:, zero] = 0.0
    iu = np.triu_indices(rows.size, k=1)
    return float(np.mean(1.0 - cos[iu]))


def quantile_group_means(keys, lidus, user_ids=None, n_groups: int = 4,
                         drop_top: bool = False) -> list:
    """Equal-size quantile groups by key, mean natural-log uncertainty each.

    Ties on the key break by user id (positional index when ids are not
    given) so the grouping is reproducible. ``drop_top`` discards the
    highest-key group before reporting. Returns one dict per retained
    group with the group index, mean log uncertainty, key range and size.
    """
    keys = np.asarray(keys, dtype=np.float64)
    lidus = np.asarray(lidus, dtype=np.float64)
    if keys.size != lidus.size:
        raise ValidationError("keys and lidus must align")
    n = keys.size
    if n < n_groups:
        raise ValidationError(f"need at least {n_groups} users, got {n}")
    if user_ids is None:
        tiebreak = np.arange(n)
    else:
        if len(user_ids) != n:
            raise ValidationError("user_ids must align with keys")
        tiebreak = np.argsort(np.argsort(np.asarray(user_ids, dtype=object), kind="stable"))
    order = np.lexsort((tiebreak, keys))
    groups = np.array_split(order, n_groups)
    if drop_top:
        groups = groups[:-1]
    log_lidu = np.log(np.maximum(lidus, LIDU_LOG_FLOOR))
    out = []
    for g_idx, members in enumerate(groups):
        out.append(
            {
                "group_index": g_idx,
                "mean_log_lidu": float(log_lidu[members].mean()),
                "key_min": float(keys[members].min()),
                "key_max": float(keys[members].max()),
                "size": int(members.size),
            }
        )
    return out


def write_group_means(groups: list, path) -> None:
    """CSV interface: group_index, mean_log_lidu, key range, size."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_index", "mean_log_lidu", "key_min", "key_max", "size"])
        for g in groups:
            writer.writerow(
                [g["group_index"], repr(g["mean_log_lidu"]), repr(g["key_min"]),
                 repr(g["key_max"]), g["size"]]
            )
