"""Classifier-cascade toolkit: build, calibrate, evaluate, and select
cascades of cheap-to-expensive models under deployment cost scenarios.
"""

from .calibration import (
    CalibratedModel,
    ConfigStats,
    ThresholdPair,
    calibrate_all,
    calibrate_thresholds,
    labels_for_matrix,
    read_calibrated,
    threshold_grid,
    threshold_stats,
    write_calibrated,
)
from .cascade import (
    TERMINAL_CUTOFF,
    CascadeEvalRecord,
    CascadeLevel,
    CascadeSpec,
    OutcomeTable,
    cascade_accuracy,
    cascade_id,
    count_cascades,
    enumerate_cascades,
    level_key,
    precompute_outcomes,
    simulate_cascade,
)
from .corpus import (
    DatasetSplits,
    ImageRecord,
    attach_difficulties,
    generate_corpus,
    latent_difficulty_for,
    load_corpus,
    read_image_file,
    read_label_file,
    round_half_up,
    split_dataset,
    write_corpus,
    write_label_file,
)
from .costs import (
    DEFAULT_COST_CONSTANTS,
    CostProfile,
    DeploymentScenario,
    TimeBreakdown,
    expected_classify_time,
    profile_costs_measured,
    profile_costs_synthetic,
    read_cost_profile,
    representation_map,
    write_cost_profile,
)
from .engine import (
    THREADS_ENV_VAR,
    CatalogChunk,
    CatalogResult,
    evaluate_catalog,
    frontier_from_arrays,
    thread_count,
)
from .errors import (
    ArtifactIOError,
    CascadeKitError,
    SelectionInfeasible,
    ValidationError,
)
from .experiments import (
    ABLATION_SUBSETS,
    AblationReport,
    AblationRow,
    DEFAULT_DEPTH_CONFIGS,
    DEFAULT_LOSS_LEVELS,
    DEFAULT_MODES,
    DEFAULT_PRECISIONS,
    DEFAULT_SIZES,
    DepthConfig,
    DepthReport,
    DepthRow,
    GridConfig,
    PipelineData,
    ScenarioRow,
    build_models,
    default_corpus,
    default_depth_pool,
    run_depth_study,
    run_scenario_comparison,
    run_transform_ablation,
    score_pipeline,
    write_ablation_report,
    write_depth_report,
    write_scenario_report,
)
from .models import (
    ANCHOR_MODEL_ID,
    ArchSpec,
    ModelSpec,
    ScoreMatrix,
    ScorerBackend,
    SyntheticScorer,
    arch_grid,
    enumerate_model_grid,
    grid_model_id,
    model_quality,
    read_model_registry,
    read_score_matrix,
    score_dataset,
    synthetic_score,
    write_model_registry,
    write_score_matrix,
)
from .pareto import (
    EvalPoint,
    ParetoFrontier,
    SelectionConstraint,
    alc,
    average_throughput,
    pareto_frontier,
    select,
    select_vs_reference,
    speedup,
)
from .transforms import (
    ColorMode,
    TransformSpec,
    apply_transform,
    input_value_count,
    representation_key,
    transform_grid,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_SUBSETS",
    "ANCHOR_MODEL_ID",
    "AblationReport",
    "AblationRow",
    "ArchSpec",
    "ArtifactIOError",
    "CalibratedModel",
    "CascadeEvalRecord",
    "CascadeKitError",
    "CascadeLevel",
    "CascadeSpec",
    "CatalogChunk",
    "CatalogResult",
    "ColorMode",
    "ConfigStats",
    "CostProfile",
    "DEFAULT_COST_CONSTANTS",
    "DEFAULT_DEPTH_CONFIGS",
    "DEFAULT_LOSS_LEVELS",
    "DEFAULT_MODES",
    "DEFAULT_PRECISIONS",
    "DEFAULT_SIZES",
    "DatasetSplits",
    "DeploymentScenario",
    "DepthConfig",
    "DepthReport",
    "DepthRow",
    "EvalPoint",
    "GridConfig",
    "ImageRecord",
    "ModelSpec",
    "OutcomeTable",
    "ParetoFrontier",
    "PipelineData",
    "ScenarioRow",
    "ScoreMatrix",
    "ScorerBackend",
    "SelectionConstraint",
    "SelectionInfeasible",
    "SyntheticScorer",
    "TERMINAL_CUTOFF",
    "THREADS_ENV_VAR",
    "ThresholdPair",
    "TimeBreakdown",
    "TransformSpec",
    "ValidationError",
    "alc",
    "apply_transform",
    "arch_grid",
    "attach_difficulties",
    "average_throughput",
    "build_models",
    "calibrate_all",
    "calibrate_thresholds",
    "cascade_accuracy",
    "cascade_id",
    "count_cascades",
    "default_corpus",
    "default_depth_pool",
    "enumerate_cascades",
    "enumerate_model_grid",
    "evaluate_catalog",
    "expected_classify_time",
    "frontier_from_arrays",
    "generate_corpus",
    "grid_model_id",
    "input_value_count",
    "labels_for_matrix",
    "latent_difficulty_for",
    "level_key",
    "load_corpus",
    "model_quality",
    "pareto_frontier",
    "precompute_outcomes",
    "profile_costs_measured",
    "profile_costs_synthetic",
    "read_calibrated",
    "read_cost_profile",
    "read_image_file",
    "read_label_file",
    "read_model_registry",
    "read_score_matrix",
    "representation_key",
    "representation_map",
    "round_half_up",
    "run_depth_study",
    "run_scenario_comparison",
    "run_transform_ablation",
    "score_dataset",
    "score_pipeline",
    "select",
    "select_vs_reference",
    "simulate_cascade",
    "speedup",
    "split_dataset",
    "synthetic_score",
    "thread_count",
    "threshold_grid",
    "threshold_stats",
    "write_ablation_report",
    "write_calibrated",
    "write_corpus",
    "write_cost_profile",
    "write_depth_report",
    "write_label_file",
    "write_model_registry",
    "write_scenario_report",
    "write_score_matrix",
]
