"""Defenses: input smoothing, train-time augmentation, detection.

Three independent mitigations, usable alone or combined:

* smoothing trajectory positions with a short convolution kernel, at train
  time, at test time, or only when a detector fires;
* augmenting training data with random feasible perturbations so the model
  sees attacker-like inputs;
* detecting perturbed histories from kinematic roughness, either a plain
  variance threshold or an RBF-kernel classifier over six features.

The kernel classifier is fitted with sklearn's SVC, then its support
vectors, dual coefficients, bias, and feature scaling are extracted into a
self-contained checkpoint; scoring is plain numpy, so detection at test
time does not depend on the fitting library.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constraints import PerturbationConstraints, project_positions
from .predictors import PredictionRequest, Predictor
from .scene import Trajectory, unit_directions
from .smoothing import SmootherSpec

DETECTOR_KINDS = ("rule_based", "kernel_classifier")
PIPELINE_MODES = ("always_smooth", "detect_then_smooth")

FEATURE_NAMES = (
    "accel_mean",
    "accel_var",
    "accel_max",
    "heading_change_mean",
    "heading_change_var",
    "jerk_max",
)

# Index of the acceleration-variance feature, the rule detector's score.
ACCEL_VAR = 1


# -- smoothing & augmentation -------------------------------------------------


def smooth(traj: Trajectory, spec: SmootherSpec | None = None) -> Trajectory:
    """Convolve the positions with the kernel; endpoints pass through."""
    spec = spec or SmootherSpec()
    if traj.n_frames < len(spec.kernel):
        raise ValueError(
            f"trajectory has {traj.n_frames} frames, kernel needs {len(spec.kernel)}"
        )
    return traj.with_positions(spec.apply(traj.positions))


def augment(
    traj: Trajectory,
    constraints: PerturbationConstraints,
    probability: float = 0.5,
    rng: np.random.Generator | None = None,
    *,
    frequency_hz: float = 1.0,
) -> Trajectory:
    """With the given probability, add a random feasible perturbation.

    The raw perturbation is drawn uniformly from the per-frame deviation
    box over the whole trajectory and then shrunk to feasibility, so the
    output never violates the constraints.
    """
    rng = np.random.default_rng() if rng is None else rng
    if rng.uniform() >= probability:
        return traj
    pos = traj.positions
    raw = rng.uniform(-constraints.max_deviation, constraints.max_deviation, size=pos.shape)
    delta, _ = project_positions(pos, raw, frequency_hz, constraints)
    return traj.with_positions(pos + delta)


def make_augmenter(
    constraints: PerturbationConstraints,
    frequency_hz: float,
    l_i: int,
    probability: float = 0.5,
):
    """Training-data hook: perturb the history part of a window, keep the
    future frames as the clean label.  Matches attack-time feasibility: the
    perturbed prefix must blend into the following unperturbed frames."""

    def hook(window: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if rng.uniform() >= probability:
            return window
        raw = rng.uniform(-constraints.max_deviation, constraints.max_deviation, size=(l_i, 2))
        delta, _ = project_positions(window, raw, frequency_hz, constraints)
        out = np.array(window, dtype=float)
        out[:l_i] += delta
        return out

    return hook


# -- features -----------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryFeatures:
    """Kinematic roughness summary of one trajectory: moments of the
    acceleration magnitude, of the per-frame heading change, and the peak
    jerk magnitude."""

    accel_mean: float
    accel_var: float
    accel_max: float
    heading_change_mean: float
    heading_change_var: float
    jerk_max: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.accel_mean,
                self.accel_var,
                self.accel_max,
                self.heading_change_mean,
                self.heading_change_var,
                self.jerk_max,
            ]
        )


def extract_features(
    traj: Trajectory | np.ndarray, frequency_hz: float = 1.0
) -> TrajectoryFeatures:
    pos = traj.positions if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if pos.ndim != 2 or pos.shape[0] < 4:
        raise ValueError("trajectory too short for features, need at least 4 frames")
    vel = np.diff(pos, axis=0) * frequency_hz
    acc = np.diff(vel, axis=0) * frequency_hz
    jerk = np.diff(acc, axis=0) * frequency_hz
    acc_mag = np.linalg.norm(acc, axis=1)
    jerk_mag = np.linalg.norm(jerk, axis=1)
    # Heading per motion segment; degenerate frames reuse the previous
    # direction, so a stationary stretch does not read as a turn.
    u = unit_directions(pos, frequency_hz)[:-1]
    angles = np.arctan2(u[:, 1], u[:, 0])
    change = np.diff(angles)
    change = (change + np.pi) % (2.0 * np.pi) - np.pi
    return TrajectoryFeatures(
        accel_mean=float(np.mean(acc_mag)),
        accel_var=float(np.var(acc_mag)),
        accel_max=float(np.max(acc_mag)),
        heading_change_mean=float(np.mean(change)),
        heading_change_var=float(np.var(change)),
        jerk_max=float(np.max(jerk_mag)),
    )


def _feature_matrix(trajs, frequency_hz: float) -> np.ndarray:
    return np.array([extract_features(t, frequency_hz).as_array() for t in trajs])


# -- detectors ----------------------------------------------------------------


@dataclass
class DetectorModel:
    """Either a threshold on acceleration variance or an RBF classifier
    over the six features.  ``score > threshold`` means adversarial; the
    classifier's threshold is its decision boundary, 0."""

    kind: str
    threshold: float
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    support: np.ndarray | None = None
    dual_coef: np.ndarray | None = None
    intercept: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"detector kind must be one of {DETECTOR_KINDS}")
        if self.kind == "rule_based":
            if self.threshold <= 0:
                raise ValueError("rule threshold must be positive")
        else:
            for name in ("feature_mean", "feature_std", "support", "dual_coef"):
                if getattr(self, name) is None:
                    raise ValueError(f"kernel classifier missing {name}")
            self.feature_mean = np.asarray(self.feature_mean, dtype=float)
            self.feature_std = np.asarray(self.feature_std, dtype=float)
            self.support = np.asarray(self.support, dtype=float)
            self.dual_coef = np.asarray(self.dual_coef, dtype=float)
            if len(self.support) < 1:
                raise ValueError("kernel classifier needs at least one support vector")
            if self.gamma <= 0:
                raise ValueError("rbf gamma must be positive")

    def score(self, features: TrajectoryFeatures | np.ndarray) -> float:
        x = features.as_array() if isinstance(features, TrajectoryFeatures) else np.asarray(features, dtype=float)
        if self.kind == "rule_based":
            return float(x[ACCEL_VAR])
        z = (x - self.feature_mean) / self.feature_std
        sq = np.sum((self.support - z) ** 2, axis=1)
        return float(self.dual_coef @ np.exp(-self.gamma * sq) + self.intercept)


@dataclass(frozen=True)
class DetectionResult:
    adversarial: bool
    score: float

    @property
    def label(self) -> str:
        return "adversarial" if self.adversarial else "normal"


def detect(
    traj: Trajectory | np.ndarray,
    detector: DetectorModel,
    frequency_hz: float = 1.0,
) -> DetectionResult:
    score = detector.score(extract_features(traj, frequency_hz))
    return DetectionResult(adversarial=score > detector.threshold, score=score)


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep, high to low: points of (fpr, tpr, threshold) where
    a score >= threshold counts as adversarial."""

    points: tuple[tuple[float, float, float], ...]
    auc: float


def roc_curve(normal_scores, adversarial_scores) -> RocCurve:
    neg = np.asarray(normal_scores, dtype=float)
    pos = np.asarray(adversarial_scores, dtype=float)
    if len(neg) == 0 or len(pos) == 0:
        raise ValueError("both classes need at least one score")
    scores = np.concatenate([neg, pos])
    labels = np.concatenate([np.zeros(len(neg)), np.ones(len(pos))])
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # One ROC point per distinct score, after its whole tie group.
    last_of_group = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps = np.cumsum(y)[last_of_group]
    fps = last_of_group + 1 - tps
    tpr = tps / len(pos)
    fpr = fps / len(neg)
    points = [(0.0, 0.0, float("inf"))]
    points += [(float(f), float(t), float(th)) for f, t, th in zip(fpr, tpr, s[last_of_group])]
    auc = float(np.trapezoid(np.r_[0.0, tpr], np.r_[0.0, fpr]))
    return RocCurve(points=tuple(points), auc=auc)


def _youden_threshold(roc: RocCurve) -> float:
    best = max(roc.points, key=lambda p: p[1] - p[0])
    # detect() uses a strict >, so split the gap below the chosen score:
    # every training score at or above it stays flagged.
    below = [p[2] for p in roc.points if p[2] < best[2]]
    floor = max(below) if below else 0.0
    threshold = 0.5 * (best[2] + floor)
    return max(threshold, 1e-12)


def train_detector(
    normal,
    adversarial,
    kind: str = "rule_based",
    frequency_hz: float = 1.0,
    seed: int = 0,
) -> tuple[DetectorModel, RocCurve]:
    """Fit a detector on labeled trajectories and report its training ROC.

    rule_based thresholds the acceleration variance at the maximum Youden
    index of the sweep.  kernel_classifier standardizes the features and
    fits an RBF support vector machine whose parameters are extracted into
    the returned model.
    """
    if kind not in DETECTOR_KINDS:
        raise ValueError(f"detector kind must be one of {DETECTOR_KINDS}")
    x_neg = _feature_matrix(normal, frequency_hz)
    x_pos = _feature_matrix(adversarial, frequency_hz)
    if len(x_neg) == 0 or len(x_pos) == 0:
        raise ValueError("both classes need at least one trajectory")

    if kind == "rule_based":
        roc = roc_curve(x_neg[:, ACCEL_VAR], x_pos[:, ACCEL_VAR])
        model = DetectorModel(kind="rule_based", threshold=_youden_threshold(roc))
        return model, roc

    from sklearn.svm import SVC

    x = np.vstack([x_neg, x_pos])
    y = np.r_[np.zeros(len(x_neg)), np.ones(len(x_pos))]
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), 1e-12)
    z = (x - mean) / std
    gamma = 1.0 / (z.shape[1] * max(z.var(), 1e-12))
    clf = SVC(C=1.0, kernel="rbf", gamma=gamma, random_state=seed)
    clf.fit(z, y)
    model = DetectorModel(
        kind="kernel_classifier",
        threshold=0.0,
        feature_mean=mean,
        feature_std=std,
        support=clf.support_vectors_,
        dual_coef=clf.dual_coef_[0],
        intercept=float(clf.intercept_[0]),
        gamma=gamma,
    )
    scores = np.array([model.score(row) for row in x])
    roc = roc_curve(scores[: len(x_neg)], scores[len(x_neg) :])
    return model, roc


def save_detector(model: DetectorModel, path: str | Path) -> None:
    data: dict = {"kind": model.kind, "threshold": model.threshold}
    if model.kind == "kernel_classifier":
        data.update(
            {
                "feature_mean": [float(v) for v in model.feature_mean],
                "feature_std": [float(v) for v in model.feature_std],
                "support": [[float(v) for v in row] for row in model.support],
                "dual_coef": [float(v) for v in model.dual_coef],
                "intercept": model.intercept,
                "gamma": model.gamma,
            }
        )
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n")


def load_detector(source: str | Path | dict) -> DetectorModel:
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    if data.get("kind") == "rule_based":
        return DetectorModel(kind="rule_based", threshold=float(data["threshold"]))
    return DetectorModel(
        kind="kernel_classifier",
        threshold=float(data.get("threshold", 0.0)),
        feature_mean=data["feature_mean"],
        feature_std=data["feature_std"],
        support=data["support"],
        dual_coef=data["dual_coef"],
        intercept=float(data["intercept"]),
        gamma=float(data["gamma"]),
    )


def save_roc(roc: RocCurve, path: str | Path) -> None:
    lines = ["fpr,tpr,threshold"]
    lines += [f"{repr(f)},{repr(t)},{repr(th)}" for f, t, th in roc.points]
    Path(path).write_text("\n".join(lines) + "\n")


# -- test-time pipeline -------------------------------------------------------


@dataclass(frozen=True)
class DefensePipeline:
    """What to do to a history before prediction."""

    smoother: SmootherSpec
    mode: str = "always_smooth"
    detector: DetectorModel | None = None
    frequency_hz: float = 1.0

    def __post_init__(self):
        if self.mode not in PIPELINE_MODES:
            raise ValueError(f"mode must be one of {PIPELINE_MODES}")
        if self.mode == "detect_then_smooth" and self.detector is None:
            raise ValueError("detect_then_smooth needs a detector")

    def should_smooth(self, history: np.ndarray) -> bool:
        if self.mode == "always_smooth":
            return True
        return detect(history, self.detector, self.frequency_hz).adversarial


class DefendedPredictor(Predictor):
    """A predictor wrapped in a defense pipeline.

    Exposes the standard predictor interface, so attacks run against the
    defense exactly as against a bare model.  Gradients follow the branch
    the detector actually took; the detector itself is a hard threshold
    and contributes no gradient.
    """

    def __init__(self, base: Predictor, pipeline: DefensePipeline):
        super().__init__(base.l_i, base.l_o, smoother=None)
        self.base = base
        self.pipeline = pipeline
        self.kind = f"{base.kind}+{pipeline.mode}"
        self._pipe_matrix = pipeline.smoother.matrix(base.l_i)

    def predict_one(self, history, neighbor_last_mean=None):
        history = np.asarray(history, dtype=float)
        if self.pipeline.should_smooth(history):
            history = self._pipe_matrix @ history
        return self.base.predict_one(history, neighbor_last_mean)

    def gradient_one(self, history, neighbor_last_mean, output_gradient):
        history = np.asarray(history, dtype=float)
        if self.pipeline.should_smooth(history):
            grad = self.base.gradient_one(self._pipe_matrix @ history, neighbor_last_mean, output_gradient)
            return self._pipe_matrix.T @ grad
        return self.base.gradient_one(history, neighbor_last_mean, output_gradient)


def defended_predict(
    model: Predictor,
    req: PredictionRequest,
    pipeline: DefensePipeline,
) -> tuple[dict[str, np.ndarray], dict[str, bool]]:
    """Predictions for every object plus whether each history was smoothed."""
    defended = DefendedPredictor(model, pipeline)
    flags = {oid: pipeline.should_smooth(h) for oid, h in req.histories.items()}
    return defended.predict(req), flags
