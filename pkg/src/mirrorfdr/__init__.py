"""mirrorfdr: covariate-adaptive false discovery rate control on raw data.

The pipeline estimates the covariate-dependent center of a symmetric
conditional null by iterative trimming, converts responses to mirror-based
empirical p-values, and learns a covariate-dependent rejection threshold with
a small neural network under a relaxed false-discovery-proportion constraint.
"""

__version__ = "0.1.0"

from .dataset import (
    Dataset,
    Hypothesis,
    Neighborhood,
    NeighborhoodQuery,
    Scaler,
    load_csv,
    neighborhood,
    scale_covariates,
    transform_response,
)
from .errors import (
    DegenerateSampleError,
    EmptyNullError,
    IllConditionedError,
    MirrorFdrError,
    NumericalError,
    ValidationError,
)
from .mirror import MirrorNull, PValueVector, all_pvalues, empirical_pvalue, mirror_null, to_pvalue_scale
from .simulation import (
    Law,
    Metrics,
    ScenarioSpec,
    TruncatedNormalSpec,
    bh_procedure,
    generate,
    replicate,
    scenario,
    truncnorm_quantile,
)
from .symmetry import (
    KdeConfig,
    SymmetryStats,
    TrimDecision,
    kde_at,
    sample_median,
    silverman_bandwidth,
    symmetry_stats,
    trim_decision,
)
from .threshold import (
    RejectionResult,
    ThresholdNet,
    TrainConfig,
    TrainingTrace,
    augmented_loss,
    fit_threshold,
    loss_and_grad,
    pretrain,
    rejections,
    surrogate_counts,
    train,
)
from .trimming import (
    CenterEstimate,
    CenterEstimates,
    TrimConfig,
    estimate_all_centers,
    estimate_center,
)

__all__ = [name for name in dir() if not name.startswith("_")]
