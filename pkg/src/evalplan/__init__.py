"""Sample-size planning and evaluation tools for detector TPR and FPR estimates."""

from .binom_core import DomainError, binom_cdf, binom_pmf, binom_sf
from .bias import bias_curves, severe_underestimation, underestimation_skew
from .category_agg import CategoryStats, WeightProfile, aggregate, compare_profiles
from .planner import (
    PlanResult,
    ToleranceSpec,
    UnsatisfiableError,
    coverage,
    plan_curve,
    required_sample_size,
)
from .roc_eval import (
    RocCurve,
    ScoredSample,
    roc_from_samples,
    subsample_bias_experiment,
    synth_scores,
    tpr_at_fpr,
)
from .timedelay_sim import (
    DelayProtocolConfig,
    ManifestEntry,
    contamination_rate,
    run_delay_protocol,
    select_eligible,
)

__version__ = "0.1.0"

__all__ = [
    "CategoryStats",
    "DelayProtocolConfig",
    "DomainError",
    "ManifestEntry",
    "PlanResult",
    "RocCurve",
    "ScoredSample",
    "ToleranceSpec",
    "UnsatisfiableError",
    "WeightProfile",
    "aggregate",
    "bias_curves",
    "binom_cdf",
    "binom_pmf",
    "binom_sf",
    "compare_profiles",
    "contamination_rate",
    "coverage",
    "plan_curve",
    "required_sample_size",
    "roc_from_samples",
    "run_delay_protocol",
    "select_eligible",
    "severe_underestimation",
    "subsample_bias_experiment",
    "synth_scores",
    "tpr_at_fpr",
    "underestimation_skew",
]
