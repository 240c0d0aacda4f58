"""Performance labels and estimator-quality metrics.

Under a leave-one-out protocol each user has a single relevant item, so
NDCG@K reduces to 1 / log2(rank + 1) when the item lands within the cutoff
and 0 otherwise. The estimator metrics compare per-user estimates against
these labels:

* Win Rate-delta: over user pairs whose estimate ranks differ by more than
  delta, the fraction where the higher estimate really has the lower NDCG.
  Chance level is 0.5.
* Pearson's r between estimates and NDCG.
* sARE: mean absolute difference between the estimator-induced and the
  NDCG-induced user ranks.

All estimators are assumed to enter in "higher value = worse predicted
performance" orientation (the uncertainty convention); pass
``expect_negative=False`` to hand in a confidence-oriented estimator
instead. The delta threshold of the win rate is applied on the rank scale
(a fraction of the report size), since raw estimate units differ between
estimators.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import ValidationError


@dataclass(frozen=True)
class EstimatorReport:
    """Per-user estimates of one estimator aligned with NDCG labels."""

    user_ids: tuple
    estimates: np.ndarray
    ndcg: np.ndarray

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=np.float64)
        nd = np.asarray(self.ndcg, dtype=np.float64)
        users = tuple(self.user_ids)
        object.__setattr__(self, "user_ids", users)
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "ndcg", nd)
        if not (len(users) == est.size == nd.size) or est.ndim != 1:
            raise ValidationError("user_ids, estimates and ndcg must be 1-d and aligned")
        if len(set(users)) != len(users):
            raise ValidationError("duplicate user in report")
        if not (np.all(np.isfinite(est)) and np.all(np.isfinite(nd))):
            raise ValidationError("estimates and ndcg must be finite")
        if np.any(nd < 0) or np.any(nd > 1):
            raise ValidationError("ndcg values must lie in [0, 1]")

    @classmethod
    def from_rows(cls, rows):
        users, est, nd = zip(*rows)
        return cls(tuple(users), np.asarray(est, float), np.asarray(nd, float))

    @property
    def per_user(self):
        return list(zip(self.user_ids, self.estimates.tolist(), self.ndcg.tolist()))

    def subset(self, users):
        keep = set(users)
        idx = [k for k, u in enumerate(self.user_ids) if u in keep]
        return EstimatorReport(
            tuple(self.user_ids[k] for k in idx), self.estimates[idx], self.ndcg[idx]
        )

    def __len__(self):
        return len(self.user_ids)


def ndcg_at_k(rank_of_target: int, k: int) -> float:
    """NDCG@k with a single relevant item at 1-based ``rank_of_target``."""
    if rank_of_target < 1:
        raise ValidationError(f"rank must be >= 1, got {rank_of_target}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if rank_of_target > k:
        return 0.0
    return 1.0 / math.log2(rank_of_target + 1.0)


def target_ranks(scores: np.ndarray, target_cols: np.ndarray) -> np.ndarray:
    """1-based rank of one target column per score row, sorting scores
    descending with ties broken by ascending column index. Excluded
    candidates should be set to -inf beforehand."""
    scores = np.asarray(scores, dtype=np.float64)
    target_cols = np.asarray(target_cols, dtype=np.int64)
    t = scores[np.arange(scores.shape[0]), target_cols]
    greater = (scores > t[:, None]).sum(axis=1)
    cols = np.arange(scores.shape[1])
    ties_before = ((scores == t[:, None]) & (cols[None, :] < target_cols[:, None])).sum(axis=1)
    return 1 + greater + ties_before


def win_rate_delta(report: EstimatorReport, delta_frac: float = 0.05,
                   expect_negative: bool = True) -> float:
    """P(ndcg_i < ndcg_j | rank(est_i) > rank(est_j) + delta) over ordered
    user pairs, with delta = delta_frac * n rank positions.

    Estimate ranks are average ranks on ties. NDCG ties count 0.5, which
    pins the chance level at exactly 0.5. Returns 0.5 when no pair clears
    the threshold. ``expect_negative=False`` negates the estimates first,
    for estimators where larger values should mean better performance.
    """
    n = len(report)
    if n < 2:
        raise ValidationError("win rate needs at least 2 users")
    if delta_frac < 0:
        raise ValidationError("delta_frac must be >= 0")
    est = report.estimates if expect_negative else -report.estimates
    r = rankdata(est)
    delta = delta_frac * n
    qualifies = r[:, None] > r[None, :] + delta
    n_q = int(qualifies.sum())
    if n_q == 0:
        return 0.5
    nd = report.ndcg
    wins = (nd[:, None] < nd[None, :]) + 0.5 * (nd[:, None] == nd[None, :])
    return float(wins[qualifies].sum() / n_q)


def pearson(x, y) -> float:
    """Plain Pearson correlation of two aligned arrays; NaN when either is
    constant (undefined, deliberately never coerced to 0)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValidationError("need two aligned arrays of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return math.nan
    return float(np.clip(float(xc @ yc) / (sx * sy), -1.0, 1.0))


def pearson_r(report: EstimatorReport) -> float:
    """Pearson correlation between estimates and NDCG labels."""
    return pearson(report.estimates, report.ndcg)


def sare(report: EstimatorReport) -> float:
    """Scaled absolute rank error.

    Users are ranked by NDCG (best performance gets rank 1) and by the
    estimate (lowest uncertainty gets rank 1, i.e. the predicted-best
    direction); ties receive average ranks. Returns the mean absolute rank
    difference, 0 for identical orderings.
    """
    if len(report) < 1:
        raise ValidationError("sare needs at least 1 user")
    r_est = rankdata(report.estimates)
    r_ndcg = rankdata(-report.ndcg)
    return float(np.abs(r_ndcg - r_est).mean())


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

def summarize(reports: dict, delta_frac: float = 0.05) -> dict:
    """Metric summary per estimator.

    ``neg_pearson_r`` is the sign-flipped correlation, the conventional
    "larger is better" presentation for uncertainty-style estimators.
    """
    out = {}
    for name, rep in reports.items():
        r = pearson_r(rep)
        out[name] = {
            "win_rate": win_rate_delta(rep, delta_frac),
            "pearson_r": r,
            "neg_pearson_r": -r if not math.isnan(r) else math.nan,
            "sare": sare(rep),
            "n_users": len(rep),
        }
    return out


def write_report_csv(reports: dict, path) -> None:
    """Long-format CSV: user_id, estimator_name, estimate, ndcg."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "estimator_name", "estimate", "ndcg"])
        for name, rep in reports.items():
            for uid, est, nd in rep.per_user:
                writer.writerow([uid, name, repr(est), repr(nd)])


def read_report_csv(path) -> dict:
    """Inverse of :func:`write_report_csv`."""
    rows_by_name: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows_by_name.setdefault(row["estimator_name"], []).append(
                (row["user_id"], float(row["estimate"]), float(row["ndcg"]))
            )
    return {name: EstimatorReport.from_rows(rows) for name, rows in rows_by_name.items()}


def jsonable(obj):
    """Recursively replace NaN with None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary_json(summary: dict, path, config: dict | None = None) -> None:
    payload = {"estimators": summary}
    if config is not None:
        payload["config"] = config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
