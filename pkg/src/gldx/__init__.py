"""Error exponents for stochastic metric decoding at finite alphabets.

Expurgated and penalized exponent forms for decoders that choose a
message with probability proportional to exp(n * score), plus the
desk-scale simulation and self-check machinery around them.
"""

from .measures import (
    Alphabet,
    Channel,
    ConditionalDistribution,
    Distribution,
    DistributionError,
    JointDistribution,
    compositions,
    conditional_divergence,
    conditional_mutual_information,
    conditional_type_count,
    empirical_joint,
    entropy,
    enumerate_types,
    mutual_information,
)
from .metrics import (
    AffineMetric,
    EmpiricalMutualInformationMetric,
    Metric,
    MetricError,
    constant_metric,
    emi_metric,
    matched_metric,
    metric_from_json,
    mismatched_metric,
)
from .optimizer import (
    FeasibleSet,
    GridSearchResult,
    GridSpec,
    InfeasibleGridError,
    golden_section_minimize,
    grid_maximize,
    grid_minimize,
    refine_joint,
)
from .exponents import (
    CompetitorScoreEvaluator,
    ConfusionExponentSolver,
    ExponentQuery,
    ExponentResult,
    competitor_score_exponent,
    exchanged_objective,
    exponent_form,
    expurgated_exponent,
    maxmin_exponent,
    pairwise_confusion_exponent,
    rate_sweep,
)
from .simulator import (
    Codebook,
    GoodCodeReport,
    SimConfig,
    check_good_code,
    empirical_exponent,
    exact_error_probability,
    gld_decode,
    gld_posterior,
    half_expurgate,
    kept_indices,
    markov_bound_check,
    monte_carlo_error,
    sample_code,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "Channel",
    "ConditionalDistribution",
    "Distribution",
    "DistributionError",
    "JointDistribution",
    "compositions",
    "conditional_divergence",
    "conditional_mutual_information",
    "conditional_type_count",
    "empirical_joint",
    "entropy",
    "enumerate_types",
    "mutual_information",
    "AffineMetric",
    "EmpiricalMutualInformationMetric",
    "Metric",
    "MetricError",
    "constant_metric",
    "emi_metric",
    "matched_metric",
    "metric_from_json",
    "mismatched_metric",
    "FeasibleSet",
    "GridSearchResult",
    "GridSpec",
    "InfeasibleGridError",
    "golden_section_minimize",
    "grid_maximize",
    "grid_minimize",
    "refine_joint",
    "CompetitorScoreEvaluator",
    "ConfusionExponentSolver",
    "ExponentQuery",
    "ExponentResult",
    "competitor_score_exponent",
    "exchanged_objective",
    "exponent_form",
    "expurgated_exponent",
    "maxmin_exponent",
    "pairwise_confusion_exponent",
    "rate_sweep",
    "Codebook",
    "GoodCodeReport",
    "SimConfig",
    "check_good_code",
    "empirical_exponent",
    "exact_error_probability",
    "gld_decode",
    "gld_posterior",
    "half_expurgate",
    "kept_indices",
    "markov_bound_check",
    "monte_carlo_error",
    "sample_code",
    "__version__",
]
