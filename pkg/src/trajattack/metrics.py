"""Prediction error metrics.

ADE is the mean per-frame Euclidean distance between a predicted and a
reference trajectory; FDE is the distance at the final frame.  The four
directional deviations project the per-frame error onto a moving frame
derived from the reference motion: front is the unit direction of travel,
left its +90 degree rotation, and rear/right their exact negations, so a
prediction pushed one meter toward oncoming traffic scores left = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import left_normal, unit_directions

METRIC_NAMES = ("ade", "fde", "left", "right", "front", "rear")
DIRECTIONS = ("left", "right", "front", "rear")


def _check_pair(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[1] != 2 or pred.shape[0] < 1:
        raise ValueError(f"prediction/reference shape mismatch: {pred.shape} vs {truth.shape}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(truth))):
        raise ValueError("metrics need finite coordinates")
    return pred, truth


def ade(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean per-frame Euclidean displacement error."""
    pred, truth = _check_pair(pred, truth)
    return float(np.mean(np.linalg.norm(pred - truth, axis=1)))


def fde(pred: np.ndarray, truth: np.ndarray) -> float:
    """Displacement error at the last predicted frame."""
    pred, truth = _check_pair(pred, truth)
    return float(np.linalg.norm(pred[-1] - truth[-1]))


def _axis_means(pred: np.ndarray, truth: np.ndarray, frequency_hz: float) -> tuple[float, float]:
    # Signed mean projections of the error onto the reference direction of
    # travel (front) and its left normal.
    u = unit_directions(truth, frequency_hz)
    diff = pred - truth
    front = float(np.mean(np.einsum("ij,ij->i", diff, u)))
    left = float(np.mean(np.einsum("ij,ij->i", diff, left_normal(u))))
    return front, left


def directional_deviation(
    pred: np.ndarray,
    truth: np.ndarray,
    direction: str,
    frequency_hz: float = 1.0,
) -> float:
    """Mean signed deviation of the prediction toward one direction.

    Directions are evaluated in the reference trajectory's own frame;
    ``right`` and ``rear`` are the exact negations of ``left`` and
    ``front``.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    pred, truth = _check_pair(pred, truth)
    front, left = _axis_means(pred, truth, frequency_hz)
    if direction == "front":
        return front
    if direction == "rear":
        return -front
    if direction == "left":
        return left
    return -left


@dataclass(frozen=True)
class ErrorReport:
    """All six metrics of one prediction against one reference."""

    ade: float
    fde: float
    left: float
    right: float
    front: float
    rear: float

    def as_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in METRIC_NAMES}

    def value(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {metric!r}")
        return float(getattr(self, metric))

    @staticmethod
    def from_dict(data: dict) -> "ErrorReport":
        return ErrorReport(**{name: float(data[name]) for name in METRIC_NAMES})


def error_report(pred: np.ndarray, truth: np.ndarray, frequency_hz: float = 1.0) -> ErrorReport:
    pred, truth = _check_pair(pred, truth)
    front, left = _axis_means(pred, truth, frequency_hz)
    return ErrorReport(
        ade=ade(pred, truth),
        fde=fde(pred, truth),
        left=left,
        right=-left,
        front=front,
        rear=-front,
    )


def mean_report(reports: list[ErrorReport]) -> ErrorReport:
    """Field-wise mean, keeping the left/right and front/rear antisymmetry
    exact."""
    if not reports:
        raise ValueError("no reports to average")
    left = float(np.mean([r.left for r in reports]))
    front = float(np.mean([r.front for r in reports]))
    return ErrorReport(
        ade=float(np.mean([r.ade for r in reports])),
        fde=float(np.mean([r.fde for r in reports])),
        left=left,
        right=-left,
        front=front,
        rear=-front,
    )


@dataclass(frozen=True)
class TransferScore:
    """Mean target/source error ratio in percent, noting skipped metrics."""

    percent: float
    skipped: tuple[str, ...] = ()


def transferability(source: ErrorReport, target: ErrorReport) -> TransferScore:
    """How much of the attack effect on the source model carries to the
    target model: the mean over the six metrics of target/source, as a
    percentage.  Metrics with a source error of exactly zero cannot be
    ratioed and are skipped with a note; all six zero is an error.
    """
    ratios = []
    skipped = []
    for name in METRIC_NAMES:
        s = source.value(name)
        t = target.value(name)
        if s == 0.0:
            skipped.append(name)
            continue
        ratios.append(t / s)
    if not ratios:
        raise ValueError("all source errors are zero, transferability undefined")
    return TransferScore(percent=float(np.mean(ratios)) * 100.0, skipped=tuple(skipped))
