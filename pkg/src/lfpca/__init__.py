"""Localized functional principal component analysis.

Detects uncorrelated contiguous sub-intervals in the covariance structure of
densely observed curves, eigendecomposes each sub-interval separately, and
merges the resulting compactly supported, orthonormal eigenfunctions by
eigenvalue magnitude with per-component and per-region explained-variance
accounting.
"""

__version__ = "0.1.0"

from .blockdetect import (
    DetectionConfig,
    blocks_from_eigenfunctions,
    calibrate_threshold,
    default_quantile,
    detect_blocks,
    resolve_threshold,
)
from .covariance import (
    DenoiseResult,
    choose_truncation,
    denoise_detail,
    denoise_kl,
    detection_covariance,
    empirical_covariance,
    weighted_eigh,
)
from .errors import (
    DataFormatError,
    DegenerateCovarianceError,
    NotCenteredError,
    NumericError,
)
from .ingest import center, load_curves, write_curves
from .localized import (
    UnionCheckResult,
    compute_scores,
    eigen_union_check,
    eigendecompose_block,
    localized_fpca,
    reconstruct,
    system_to_json_dict,
)
from .model import (
    BlockPartition,
    CovMatrix,
    CurveSet,
    EigenComponent,
    Grid,
    LocalizedEigenSystem,
    ScoreMatrix,
    make_uniform_grid,
)
from .pipeline import FitResult, fit_localized
from .sim import (
    MatchResult,
    MetricsRecord,
    SimDesign,
    StudyConfig,
    build_basis,
    design_a,
    design_b,
    generate,
    match_components,
    population_covariance,
    pve_ratio,
    run_study,
    summarize_metrics,
    support_metrics,
    true_support_indices,
    write_metrics_csv,
)

__all__ = [
    "BlockPartition",
    "CovMatrix",
    "CurveSet",
    "DataFormatError",
    "DegenerateCovarianceError",
    "DenoiseResult",
    "DetectionConfig",
    "EigenComponent",
    "FitResult",
    "Grid",
    "LocalizedEigenSystem",
    "MatchResult",
    "MetricsRecord",
    "NotCenteredError",
    "NumericError",
    "ScoreMatrix",
    "SimDesign",
    "StudyConfig",
    "UnionCheckResult",
    "blocks_from_eigenfunctions",
    "build_basis",
    "calibrate_threshold",
    "center",
    "choose_truncation",
    "compute_scores",
    "default_quantile",
    "denoise_detail",
    "denoise_kl",
    "design_a",
    "design_b",
    "detect_blocks",
    "detection_covariance",
    "eigen_union_check",
    "eigendecompose_block",
    "empirical_covariance",
    "fit_localized",
    "generate",
    "load_curves",
    "localized_fpca",
    "make_uniform_grid",
    "match_components",
    "population_covariance",
    "pve_ratio",
    "reconstruct",
    "resolve_threshold",
    "run_study",
    "summarize_metrics",
    "support_metrics",
    "system_to_json_dict",
    "true_support_indices",
    "weighted_eigh",
    "write_curves",
    "write_metrics_csv",
]
