"""Physically feasible adversarial perturbations against trajectory
predictors, with mitigations and a downstream planning impact evaluator.

The pieces compose in the order a study runs them: build or load scenes,
fit predictors, search for feasible history perturbations that maximize
prediction error, measure what detectors and smoothing recover, and check
whether the induced errors would change a following vehicle's braking
decision.
"""

__version__ = "0.1.0"

from .attacks import (
    AttackConfig,
    AttackResult,
    ObjectiveEvaluator,
    PgdParams,
    PsoParams,
    objective_value,
    pgd_attack,
    pso_attack,
    run_attack,
)
from .constraints import (
    Feasibility,
    PerturbationConstraints,
    PhysicalBounds,
    Violation,
    check_feasible,
    estimate_bounds,
    load_bounds,
    preset_bounds,
    project,
    save_bounds,
)
from .generate import (
    FAMILIES,
    HALF_LANE,
    LANE_WIDTH,
    PRESETS,
    DatasetPreset,
    generate_corpus,
    generate_scene,
)
from .metrics import (
    DIRECTIONS,
    METRIC_NAMES,
    ErrorReport,
    TransferScore,
    ade,
    directional_deviation,
    error_report,
    fde,
    mean_report,
    transferability,
)
from .mitigation import (
    DefendedPredictor,
    DefensePipeline,
    DetectionResult,
    DetectorModel,
    RocCurve,
    TrajectoryFeatures,
    augment,
    defended_predict,
    detect,
    extract_features,
    load_detector,
    make_augmenter,
    roc_curve,
    save_detector,
    save_roc,
    smooth,
    train_detector,
)
from .planning import (
    AvState,
    Crossing,
    ImpactComparison,
    ImpactVerdict,
    assess_prediction,
    av_behind_target,
    classify_severity,
    find_crossing,
    impact_report,
    required_deceleration,
    severity_rank,
)
from .predictors import (
    ConstantAccelerationPredictor,
    ConstantVelocityPredictor,
    GradientUnavailable,
    NeuralPredictor,
    PredictionRequest,
    Predictor,
    TrainOptions,
    load_model,
    make_predictor,
    save_model,
    train,
)
from .scene import (
    KinematicProfile,
    ObjectState,
    Scene,
    SceneFormatError,
    Trajectory,
    kinematics,
    left_normal,
    load_scene,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    unit_directions,
)
from .smoothing import SmootherSpec
from .suite import (
    AttackGrid,
    SuiteCell,
    SuiteResult,
    TransferTable,
    run_attack_suite,
    transfer_matrix,
)

__all__ = [
    "AttackConfig",
    "AttackGrid",
    "AttackResult",
    "AvState",
    "ConstantAccelerationPredictor",
    "ConstantVelocityPredictor",
    "Crossing",
    "DatasetPreset",
    "DefendedPredictor",
    "DefensePipeline",
    "DetectionResult",
    "DetectorModel",
    "DIRECTIONS",
    "ErrorReport",
    "FAMILIES",
    "Feasibility",
    "GradientUnavailable",
    "HALF_LANE",
    "ImpactComparison",
    "ImpactVerdict",
    "KinematicProfile",
    "LANE_WIDTH",
    "METRIC_NAMES",
    "NeuralPredictor",
    "ObjectState",
    "ObjectiveEvaluator",
    "PerturbationConstraints",
    "PgdParams",
    "PhysicalBounds",
    "PredictionRequest",
    "Predictor",
    "PRESETS",
    "PsoParams",
    "RocCurve",
    "Scene",
    "SceneFormatError",
    "SmootherSpec",
    "SuiteCell",
    "SuiteResult",
    "TrainOptions",
    "Trajectory",
    "TrajectoryFeatures",
    "TransferScore",
    "TransferTable",
    "Violation",
    "ade",
    "assess_prediction",
    "augment",
    "av_behind_target",
    "check_feasible",
    "classify_severity",
    "defended_predict",
    "detect",
    "directional_deviation",
    "error_report",
    "estimate_bounds",
    "extract_features",
    "fde",
    "find_crossing",
    "generate_corpus",
    "generate_scene",
    "impact_report",
    "kinematics",
    "left_normal",
    "load_bounds",
    "load_detector",
    "load_model",
    "load_scene",
    "make_augmenter",
    "make_predictor",
    "mean_report",
    "objective_value",
    "pgd_attack",
    "preset_bounds",
    "project",
    "pso_attack",
    "required_deceleration",
    "severity_rank",
    "roc_curve",
    "run_attack",
    "run_attack_suite",
    "save_bounds",
    "save_detector",
    "save_model",
    "save_roc",
    "save_scene",
    "scene_from_dict",
    "scene_to_dict",
    "smooth",
    "train",
    "train_detector",
    "transfer_matrix",
    "transferability",
    "unit_directions",
]
