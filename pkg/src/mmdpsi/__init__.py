"""Kernel two-sample divergence estimation with exact post-selection inference."""

__version__ = "0.1.0"

from .data import SampleSet, load_samples, save_samples
from .errors import (
    ConfigError,
    DataError,
    InfeasibleSelectionError,
    MmdPsiError,
    NumericalError,
)
from .estimators import (
    EstimatorSpec,
    MmdEstimate,
    PairDesign,
    h_values,
    make_pair_design,
    mmd_block,
    mmd_complete,
    mmd_incomplete,
    mmd_linear,
)
from .inference import (
    PsiResult,
    psi_pvalue,
    test_selected_features,
    truncation_interval,
    truncnorm_cdf,
)
from .kernels import (
    FixedBandwidth,
    KernelConfig,
    MedianHeuristic,
    PairedPoint,
    gaussian_kernel,
    h_kernel,
    resolve_bandwidth,
)
from .pipeline import ExperimentReport, RunConfig, feature_psi, sample_select
from .screening import (
    ScreenState,
    SelectionConstraints,
    estimate_covariance,
    per_feature_scores,
    select_top_k,
    selection_constraints,
)
from .synthetic import SyntheticSpec, append_random_features, generate

__all__ = [
    "ConfigError",
    "DataError",
    "EstimatorSpec",
    "ExperimentReport",
    "FixedBandwidth",
    "InfeasibleSelectionError",
    "KernelConfig",
    "MedianHeuristic",
    "MmdEstimate",
    "MmdPsiError",
    "NumericalError",
    "PairDesign",
    "PairedPoint",
    "PsiResult",
    "RunConfig",
    "SampleSet",
    "ScreenState",
    "SelectionConstraints",
    "SyntheticSpec",
    "append_random_features",
    "estimate_covariance",
    "feature_psi",
    "gaussian_kernel",
    "generate",
    "h_kernel",
    "h_values",
    "load_samples",
    "make_pair_design",
    "mmd_block",
    "mmd_complete",
    "mmd_incomplete",
    "mmd_linear",
    "per_feature_scores",
    "psi_pvalue",
    "resolve_bandwidth",
    "sample_select",
    "save_samples",
    "select_top_k",
    "selection_constraints",
    "test_selected_features",
    "truncation_interval",
    "truncnorm_cdf",
]
