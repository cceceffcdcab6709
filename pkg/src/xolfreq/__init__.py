"""Claim-frequency estimation for excess-of-loss development triangles.

The package splits excess-claim counts into newly reported claims and
claims dropping back below the priority, fits Poisson and
negative-binomial frequency models on the resulting triangles, derives the
exact predictive laws for pricing and reserving, and quantifies parameter
uncertainty with a reproducible parametric bootstrap.
"""

from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    TargetSummary,
    resample_params_poisson,
    simulate_lower_triangle_negbin,
    simulate_lower_triangle_poisson,
    simulate_next_year_negbin,
    simulate_next_year_poisson,
    summarize,
)
from .datasets import load_example, load_portfolio
from .distributions import (
    Binomial,
    Convolution,
    CountDistribution,
    NegBin,
    Poisson,
    moments,
)
from .estimators import (
    JointFit,
    NegBinFit,
    PoissonFit,
    conditional_factors,
    estimate_delta,
    estimate_lambda,
    estimate_r,
    fit_negbin,
    fit_poisson,
    joint_loglik,
    joint_mle,
    lambda_prime,
    mle_p1,
    p_sequence,
)
from .model_selection import ModelComparison, compare, loglik_negbin, loglik_poisson
from .prediction import (
    PredictiveLaw,
    conditional_law,
    point_estimate_ultimate,
    predict_next_year_negbin,
    predict_next_year_poisson,
)
from .triangle import (
    ClaimTriangle,
    ExposureVector,
    TrianglePair,
    ValidationReport,
    Violation,
    build_cumulative,
    parse_exposure_csv,
    parse_triangle_csv,
    serialize_exposure_csv,
    serialize_triangle_csv,
    split_next_year_exposure,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "Binomial",
    "ClaimTriangle",
    "Convolution",
    "CountDistribution",
    "ExposureVector",
    "JointFit",
    "ModelComparison",
    "NegBin",
    "NegBinFit",
    "Poisson",
    "PoissonFit",
    "PredictiveLaw",
    "TargetSummary",
    "TrianglePair",
    "ValidationReport",
    "Violation",
    "build_cumulative",
    "compare",
    "conditional_factors",
    "conditional_law",
    "estimate_delta",
    "estimate_lambda",
    "estimate_r",
    "fit_negbin",
    "fit_poisson",
    "joint_loglik",
    "joint_mle",
    "lambda_prime",
    "load_example",
    "load_portfolio",
    "loglik_negbin",
    "loglik_poisson",
    "mle_p1",
    "moments",
    "p_sequence",
    "parse_exposure_csv",
    "parse_triangle_csv",
    "point_estimate_ultimate",
    "predict_next_year_negbin",
    "predict_next_year_poisson",
    "resample_params_poisson",
    "serialize_exposure_csv",
    "serialize_triangle_csv",
    "simulate_lower_triangle_negbin",
    "simulate_lower_triangle_poisson",
    "simulate_next_year_negbin",
    "simulate_next_year_poisson",
    "split_next_year_exposure",
    "summarize",
    "validate",
]
