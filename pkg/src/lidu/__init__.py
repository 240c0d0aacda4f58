"""List distribution uncertainty (LiDu) for top-N ranking models.

LiDu is the negative log probability that a ranking model generates its own
top list, given a Gaussian score distribution (mean, variance) per candidate
item. The package bundles the uncertainty computation, variance backends
(MC dropout, deep ensembles, Gaussian output head), desk-scale matrix
factorization trainers, a synthetic correlation experiment, label-free
baseline estimators, and the evaluation harness that scores all of them
against NDCG-based performance labels.
"""

from .core import (
    DataFormatError,
    DatasetSplit,
    Interaction,
    LiduConfig,
    LiduError,
    RankedPrediction,
    ScoreDistribution,
    TrainingError,
    ValidationError,
    standard_normal_cdf,
)
from .uncertainty import (
    LiduValue,
    lidu_full,
    lidu_topn,
    list_log_prob,
    pairwise_prob,
    pointwise_uncertainty,
    position_weight,
    step_index,
)
from .backends import (
    SamplePack,
    ensemble_predict,
    gaussian_head_predict,
    mc_dropout_predict,
    variance_from_samples,
)
from .models import (
    MfModel,
    TrainConfig,
    load_model,
    save_model,
    score,
    train_bpr,
    train_gaussian_nll,
    train_mse,
    user_mean_loss,
)
from .synthetic import SyntheticSpec, run_synthetic_experiment
from .evaluation import EstimatorReport, ndcg_at_k, pearson_r, sare, win_rate_delta

__version__ = "0.1.0"
