"""Domain types and numeric primitives shared by every other module.

All reals are 64-bit floats end to end. The types here are immutable after
construction and safe to share across threads; every operation is a pure
function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

VALID_BACKENDS = ("mc_dropout", "ensemble", "gaussian_head")


class LiduError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LiduError, ValueError):
    """An argument violates a documented precondition or invariant."""


class DataFormatError(LiduError, ValueError):
    """Malformed input data; the message names the offending location."""


class TrainingError(LiduError, RuntimeError):
    """Model training failed, e.g. the loss became non-finite."""


def standard_normal_cdf(x):
    """Standard normal CDF, evaluated through the complementary error
    function so the absolute error stays below 1e-12 everywhere.

    Accepts scalars or numpy arrays and returns the matching shape.
    """
    return ndtr(x)


@dataclass(frozen=True)
class ScoreDistribution:
    """Predictive score distribution of one (user, item) pair.

    ``mean`` is the expected score (unbounded, score units); ``variance``
    is the score variability in squared units and must be nonnegative.
    """

    mean: float
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        if not np.isfinite(self.mean) or not np.isfinite(self.variance):
            raise ValidationError(
                f"ScoreDistribution requires finite fields, got "
                f"mean={self.mean}, variance={self.variance}"
            )
        if self.variance < 0:
            raise ValidationError(f"variance must be >= 0, got {self.variance}")


class RankedPrediction:
    """A user's candidate items sorted by predicted score distribution.

    Items are ordered by strictly non-increasing mean; exact ties on the
    mean are broken by ascending item id, so construction is deterministic
    regardless of the input order. Duplicate item ids are rejected.
    """

    __slots__ = ("user_id", "item_ids", "means", "variances")

    def __init__(self, user_id, item_ids, means, variances):
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        item_ids = np.asarray(item_ids)
        if not (means.shape == variances.shape == item_ids.shape) or means.ndim != 1:
            raise ValidationError("item_ids, means and variances must be 1-d and aligned")
        if means.size == 0:
            raise ValidationError("a ranked prediction needs at least one item")
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(variances)):
            raise ValidationError("means and variances must be finite")
        if np.any(variances < 0):
            raise ValidationError("variances must be >= 0")
        if np.unique(item_ids).size != item_ids.size:
            raise ValidationError(f"duplicate item ids for user {user_id!r}")
        order = np.lexsort((item_ids, -means))
        self.user_id = user_id
        self.item_ids = item_ids[order]
        self.means = means[order]
        self.variances = variances[order]

    @classmethod
    def from_pairs(cls, user_id, pairs):
        """Build from an iterable of (item_id, ScoreDistribution)."""
        ids, dists = zip(*pairs)
        return cls(
            user_id,
            list(ids),
            [d.mean for d in dists],
            [d.variance for d in dists],
        )

    @property
    def items(self):
        """Ordered list of (item_id, ScoreDistribution) tuples."""
        return [
            (i, ScoreDistribution(m, v))
            for i, m, v in zip(self.item_ids.tolist(), self.means, self.variances)
        ]

    def __len__(self):
        return int(self.means.size)

    def __repr__(self):
        return f"RankedPrediction(user={self.user_id!r}, n_items={len(self)})"


@dataclass(frozen=True)
class Interaction:
    """One raw user-item interaction record.

    ``timestamp`` totally orders a user's interactions; ties are broken by
    input (file) order, which callers preserve through stable sorting.
    """

    user_id: object
    item_id: object
    timestamp: int
    rating: float | None = None


@dataclass
class DatasetSplit:
    """Leave-one-out split: per user the last interaction is test, the
    second last is validation, and the remainder is train."""

    train: list
    valid: list
    test: list
    _train_by_user: dict | None = field(default=None, init=False, repr=False)

    def train_by_user(self):
        """User id -> chronological list of train interactions (cached)."""
        if self._train_by_user is None:
            by_user: dict = {}
            for it in self.train:
                by_user.setdefault(it.user_id, []).append(it)
            self._train_by_user = by_user
        return self._train_by_user

    def counts(self):
        return {"train": len(self.train), "valid": len(self.valid), "test": len(self.test)}


@dataclass(frozen=True)
class LiduConfig:
    """Hyperparameters of the top-N uncertainty computation.

    ``n_top`` is the number of leading ranks whose stability is measured,
    ``l_max`` the deepest rank any of them is compared against, ``n_passes``
    the number of stochastic forward passes (T) and ``dropout_p`` the drop
    probability for the MC dropout backend. ``literal_position_bias``
    switches the position discount to the alternative reading where each
    pairwise probability is divided by the position weight before the log.
    """

    n_top: int = 100
    l_max: int = 1000
    backend: str = "mc_dropout"
    dropout_p: float = 0.2
    n_passes: int = 50
    literal_position_bias: bool = False

    def __post_init__(self):
        if self.n_top < 1:
            raise ValidationError(f"n_top must be >= 1, got {self.n_top}")
        if self.l_max < self.n_top:
            raise ValidationError(
                f"l_max ({self.l_max}) must be >= n_top ({self.n_top})"
            )
        if self.backend not in VALID_BACKENDS:
            raise ValidationError(
                f"backend must be one of {VALID_BACKENDS}, got {self.backend!r}"
            )
        if not 0.0 < self.dropout_p < 1.0:
            raise ValidationError(f"dropout_p must be in (0, 1), got {self.dropout_p}")
        if self.n_passes < 1:
            raise ValidationError(f"n_passes must be >= 1, got {self.n_passes}")
