"""Synthetic matrix factorization experiment.

Builds a low-rank ground truth from sinusoidal transforms of uniformly
random phase matrices, samples train/validation/test cells without
replacement under a Zipf-style weighting (cells near the top-left corner
are far more likely), trains an MSE factorization, and correlates two
uncertainty measures against two-target ranking correctness:

* lidu: the negative log pairwise ranking probability of each test pair,
  from MC-dropout score distributions.
* pointwise: the summed MC-dropout variance of the pair.

Each (density, seed) cell of the experiment is fully deterministic. The
result table serializes to CSV with a JSON metadata sidecar.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .backends import mc_dropout_scores
from .core import RankedPrediction, ValidationError
from .evaluation import pearson
from .models import MfModel, TrainConfig, train_mse
from .uncertainty import lidu_full, pointwise_uncertainty

ALLOWED_N = (250, 500, 1000, 2000)
MAX_DENSITY = 0.04


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and sampling parameters of one synthetic experiment."""

    n: int = 500
    d: int = 8
    density: float = 0.04
    alpha: float = 5.0
    test_size: int = 1000
    valid_size: int = 1000
    seeds: tuple = (0, 1, 2, 3, 4)
    dropout_p: float = 0.2
    n_passes: int = 20
    max_epochs: int = 300

    def __post_init__(self):
        if self.n not in ALLOWED_N:
            raise ValidationError(f"n must be one of {ALLOWED_N}, got {self.n}")
        if not 0.0 < self.density <= MAX_DENSITY:
            raise ValidationError(
                f"density must be in (0, {MAX_DENSITY}], got {self.density}"
            )
        if self.d < 1 or self.test_size < 2 or self.valid_size < 1:
            raise ValidationError("d, test_size and valid_size must be positive")
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.density * self.n**2 < 2.0 * self.d * self.n:
            warnings.warn(
                "training sample smaller than the parameter count; the "
                "factorization is underdetermined"
            )

    @property
    def train_size(self) -> int:
        return int(round(self.density * self.n**2))


def generate_ground_truth(spec: SyntheticSpec, seed: int):
    """(X, Y, Z) with X = cos(R) + sin(R), Y = sin(R') - cos(R'), Z = X Y^T,
    where R and R' are i.i.d. uniform(0, 2 pi) phase matrices."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    r_x = rng.uniform(0.0, 2.0 * np.pi, (spec.n, spec.d))
    r_y = rng.uniform(0.0, 2.0 * np.pi, (spec.n, spec.d))
    x_true = np.cos(r_x) + np.sin(r_x)
    y_true = np.sin(r_y) - np.cos(r_y)
    return x_true, y_true, x_true @ y_true.T


def zipf_cell_weights(n: int, alpha: float) -> np.ndarray:
    """Flat (row-major) sampling weights proportional to 1/(i + j + 1)^alpha
    over 0-based cell coordinates, normalized to sum to 1."""
    idx = np.arange(n, dtype=np.float64)
    w = 1.0 / (idx[:, None] + idx[None, :] + 1.0) ** alpha
    w = w.ravel()
    return w / w.sum()


def sample_splits(z_star: np.ndarray, spec: SyntheticSpec, seed: int):
    """Disjoint (train, valid, test) flat cell indices.

    The union is drawn without replacement under the Zipf weights via
    exponential-race keys (equivalent to sequential weighted sampling), and
    a seeded shuffle assigns cells to the three sets so each follows the
    same law. The returned arrays preserve the assignment order; test
    pairing downstream uses consecutive cells of the test array.
    """
    n = z_star.shape[0]
    if z_star.shape != (n, n):
        raise ValidationError("z_star must be square")
    sizes = (spec.train_size, spec.valid_size, spec.test_size)
    total = sum(sizes)
    if total > n * n:
        raise ValidationError(
            f"requested {total} cells but the matrix only has {n * n}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    idx = np.arange(n, dtype=np.float64)
    log_w = -spec.alpha * np.log(idx[:, None] + idx[None, :] + 1.0).ravel()
    keys = log_w + rng.gumbel(size=log_w.size)
    chosen = np.argsort(-keys, kind="stable")[:total]
    chosen = chosen[rng.permutation(total)]
    train = chosen[: sizes[0]]
    valid = chosen[sizes[0] : sizes[0] + sizes[1]]
    test = chosen[sizes[0] + sizes[1] :]
    return train, valid, test


def _cells_to_triples(flat_idx: np.ndarray, z_star: np.ndarray) -> np.ndarray:
    n = z_star.shape[0]
    rows, cols = np.divmod(flat_idx, n)
    return np.column_stack([rows, cols, z_star[rows, cols]])


def pair_correctness(model: MfModel, test_pairs, z_star: np.ndarray) -> np.ndarray:
    """Per-pair two-target correctness: 1 when the true and predicted score
    differences agree in sign, 0 when they disagree, 0.5 when either
    difference is exactly zero."""
    pairs = np.asarray(test_pairs, dtype=np.int64)
    if pairs.ndim != 3 or pairs.shape[1:] != (2, 2):
        raise ValidationError("test_pairs must have shape (m, 2, 2)")
    pred = np.einsum(
        "mkd,mkd->mk", model.user_emb[pairs[:, :, 0]], model.item_emb[pairs[:, :, 1]]
    )
    true = z_star[pairs[:, :, 0], pairs[:, :, 1]]
    d_true = np.sign(true[:, 0] - true[:, 1])
    d_pred = np.sign(pred[:, 0] - pred[:, 1])
    tie = (d_true == 0) | (d_pred == 0)
    return np.where(tie, 0.5, (d_true == d_pred).astype(np.float64))


def pair_accuracy(model: MfModel, test_pairs, z_star: np.ndarray) -> float:
    """Fraction of test pairs ranked in the true order (ties count 0.5)."""
    return float(pair_correctness(model, test_pairs, z_star).mean())


def _pair_uncertainties(model: MfModel, pairs: np.ndarray, spec: SyntheticSpec, seed: int):
    """Per-pair LiDu and summed variance from MC-dropout distributions."""
    lidu_vals = np.empty(pairs.shape[0])
    pw_vals = np.empty(pairs.shape[0])
    for k, pair in enumerate(pairs):
        means = np.empty(2)
        variances = np.empty(2)
        for c, (row, col) in enumerate(pair):
            m, v = mc_dropout_scores(
                model, int(row), [int(col)], spec.dropout_p, spec.n_passes, seed
            )
            means[c], variances[c] = m[0], v[0]
        pred = RankedPrediction("pair", [0, 1], means, variances)
        lidu_vals[k] = lidu_full(pred, 2).value
        pw_vals[k] = pointwise_uncertainty(pred, 2)
    return lidu_vals, pw_vals


@dataclass
class SyntheticExperimentResult:
    """Row-oriented experiment table plus optional frequency-bucket rows."""

    spec: SyntheticSpec
    densities: list
    rows: list = field(default_factory=list)
    freq_rows: list = field(default_factory=list)

    def mean_r(self, density: float, estimator: str) -> float:
        vals = [
            r["pearson_r"]
            for r in self.rows
            if r["density"] == density and r["estimator"] == estimator
        ]
        return float(np.mean(vals))


def run_synthetic_experiment(spec: SyntheticSpec, density_grid=None,
                             freq_buckets: bool = False,
                             verbose: bool = False) -> SyntheticExperimentResult:
    """Run the full correlation experiment.

    Per density and seed: generate the ground truth, sample splits, train
    the MSE factorization, pair consecutive test cells, and record the
    Pearson correlation of each uncertainty measure against correctness
    plus the mean accuracy. With ``freq_buckets`` the test pairs are also
    partitioned into Zipf-weight quartiles (1 = lowest weight) with a
    per-quartile correlation each.
    """
    densities = [float(x) for x in (density_grid if density_grid is not None else [spec.density])]
    result = SyntheticExperimentResult(spec=spec, densities=densities)
    for density in densities:
        sp = replace(spec, density=density)
        for seed in sp.seeds:
            x_true, y_true, z_star = generate_ground_truth(sp, seed)
            tr, va, te = sample_splits(z_star, sp, seed)
            cfg = TrainConfig(
                learning_rate=0.01, batch_size=32, patience=10,
                max_epochs=sp.max_epochs, seed=seed, d=sp.d,
            )
            model = train_mse(
                _cells_to_triples(tr, z_star), cfg, _cells_to_triples(va, z_star),
                n_rows=sp.n, n_cols=sp.n,
            )
            usable = te[: te.size - (te.size % 2)]
            n = z_star.shape[0]
            coords = np.column_stack(np.divmod(usable, n)).reshape(-1, 2, 2)
            correctness = pair_correctness(model, coords, z_star)
            lidu_vals, pw_vals = _pair_uncertainties(model, coords, sp, seed)
            acc = float(correctness.mean())
            for name, vals in (("lidu", lidu_vals), ("pointwise", pw_vals)):
                result.rows.append(
                    {
                        "n": sp.n, "density": density, "seed": seed,
                        "estimator": name,
                        "pearson_r": pearson(vals, correctness),
                        "accuracy_mean": acc,
                    }
                )
            if verbose:
                r_l = result.rows[-2]["pearson_r"]
                print(
                    f"  density={density:.4f} seed={seed}: accuracy={acc:.3f} "
                    f"r(lidu)={r_l:.3f}", flush=True,
                )
            if freq_buckets:
                weights = zipf_cell_weights(n, sp.alpha)
                pair_w = weights[usable].reshape(-1, 2).mean(axis=1)
                order = np.argsort(pair_w, kind="stable")
                quartiles = np.array_split(order, 4)
                for q, members in enumerate(quartiles, start=1):
                    for name, vals in (("lidu", lidu_vals), ("pointwise", pw_vals)):
                        result.freq_rows.append(
                            {
                                "n": sp.n, "density": density, "seed": seed,
                                "estimator": name, "quartile": q,
                                "pearson_r": pearson(vals[members], correctness[members]),
                                "accuracy_mean": float(correctness[members].mean()),
                            }
                        )
    return result


TABLE_COLUMNS = ("n", "density", "seed", "estimator", "pearson_r", "accuracy_mean")
FREQ_COLUMNS = ("n", "density", "seed", "estimator", "quartile", "pearson_r", "accuracy_mean")


def _write_rows(rows, columns, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


def write_table(result: SyntheticExperimentResult, csv_path, meta_path=None,
                freq_path=None) -> None:
    """Serialize the experiment: CSV table, JSON metadata sidecar, and an
    optional frequency-quartile CSV."""
    _write_rows(result.rows, TABLE_COLUMNS, csv_path)
    if freq_path is not None and result.freq_rows:
        _write_rows(result.freq_rows, FREQ_COLUMNS, freq_path)
    if meta_path is None:
        meta_path = str(csv_path) + ".meta.json"
    spec = result.spec
    meta = {
        "n": spec.n, "d": spec.d, "alpha": spec.alpha,
        "densities": result.densities, "seeds": list(spec.seeds),
        "test_size": spec.test_size, "valid_size": spec.valid_size,
        "dropout_p": spec.dropout_p, "n_passes": spec.n_passes,
        "max_epochs": spec.max_epochs,
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
