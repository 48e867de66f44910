"""camcurves: classifier metrics, learning-curve models and training-set
size planning for balanced camera-trap studies."""

from .betagam import (
    AdditiveModel,
    FactorTerm,
    ModelSpec,
    SmoothTerm,
    backward_eliminate,
    beta_loglik,
    default_spec,
    fit,
    fit_stats,
    predict,
    squeeze,
    term_edf,
    wald_p,
)
from .curves import LearningCurveModel, fit_log_curve, predict_metric, table1_presets
from .design import (
    GridConfig,
    SamplingManifest,
    default_grid_config,
    equal_space_select,
    simulate_grid,
    split_design,
    validate_location_coverage,
)
from .errors import (
    CamcurvesError,
    ConvergenceError,
    InfeasiblePlanError,
    InputError,
    NoPositivePredictions,
    UndefinedMetricError,
)
from .metrics import (
    ConfusionCounts,
    MetricObservation,
    PredictionRecord,
    accuracy,
    aggregate,
    false_positive_rate,
    precision,
    tally_confusion,
    true_positive_rate,
)
from .planner import (
    PlanQuery,
    PlanResult,
    gam_required_sample_size,
    plan_report,
    required_sample_size,
)
from .splines import KnotVector, SmoothBasis, build_basis, center_basis, place_knots

__version__ = "0.1.0"

__all__ = [
    "AdditiveModel",
    "CamcurvesError",
    "ConfusionCounts",
    "ConvergenceError",
    "FactorTerm",
    "GridConfig",
    "InfeasiblePlanError",
    "InputError",
    "KnotVector",
    "LearningCurveModel",
    "MetricObservation",
    "ModelSpec",
    "NoPositivePredictions",
    "PlanQuery",
    "PlanResult",
    "PredictionRecord",
    "SamplingManifest",
    "SmoothBasis",
    "SmoothTerm",
    "UndefinedMetricError",
    "accuracy",
    "aggregate",
    "backward_eliminate",
    "beta_loglik",
    "build_basis",
    "center_basis",
    "default_grid_config",
    "default_spec",
    "equal_space_select",
    "false_positive_rate",
    "fit",
    "fit_log_curve",
    "fit_stats",
    "gam_required_sample_size",
    "place_knots",
    "plan_report",
    "precision",
    "predict",
    "predict_metric",
    "required_sample_size",
    "simulate_grid",
    "split_design",
    "squeeze",
    "table1_presets",
    "tally_confusion",
    "term_edf",
    "true_positive_rate",
    "validate_location_coverage",
    "wald_p",
]
