"""Variability-map toolkit.

Learns maps from HPC system configuration to IO-throughput variability from
replicated benchmark runs, compares surrogate families on interpolation and
extrapolation splits, and optimizes configurations for minimal variability
under a mean-performance constraint.
"""

__version__ = "0.1.0"

from ._errors import FitError, IngestError, OptimizationError, VmapError
from .dataspace import (
    ContinuousPoint,
    DatasetSplit,
    RunRecord,
    SplitSpec,
    SystemConfiguration,
    VariabilityMapKey,
    VariabilityObservation,
    compute_pvm,
    default_split_spec,
    encode_point,
    ingest_runs,
    inverse_transform_response,
    read_observations,
    split_dataset,
    transform_response,
    write_observations,
)
from .evaluation import ErrorReport, compute_metrics, export_ratio_distribution, export_reports, run_benchmark
from .optimizer import (
    BoxDomain,
    ConstrainedProblem,
    OptimizationResult,
    augmented_objective,
    direct_minimize,
    optimize_all_modes,
    round_solution,
    solve_constrained,
)
from .surrogates import (
    ModelSpec,
    SurrogateModel,
    fit,
    fit_cgp,
    fit_gamma_glm,
    fit_lsp,
    fit_mars,
    fit_performance_surface,
    predict,
    predict_batch,
    predict_with_flag,
)

__all__ = [
    "__version__",
    "VmapError",
    "IngestError",
    "FitError",
    "OptimizationError",
    "SystemConfiguration",
    "RunRecord",
    "ContinuousPoint",
    "VariabilityMapKey",
    "VariabilityObservation",
    "DatasetSplit",
    "SplitSpec",
    "ingest_runs",
    "compute_pvm",
    "encode_point",
    "split_dataset",
    "default_split_spec",
    "transform_response",
    "inverse_transform_response",
    "read_observations",
    "write_observations",
    "ModelSpec",
    "SurrogateModel",
    "fit",
    "fit_performance_surface",
    "fit_gamma_glm",
    "fit_lsp",
    "fit_mars",
    "fit_cgp",
    "predict",
    "predict_batch",
    "predict_with_flag",
    "ErrorReport",
    "compute_metrics",
    "run_benchmark",
    "export_reports",
    "export_ratio_distribution",
    "BoxDomain",
    "ConstrainedProblem",
    "OptimizationResult",
    "augmented_objective",
    "direct_minimize",
    "solve_constrained",
    "round_solution",
    "optimize_all_modes",
]
