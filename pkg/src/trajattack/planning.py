"""Downstream planning impact of a prediction.

Models the victim vehicle as driving a straight lane at constant speed for
the prediction horizon.  If a predicted trajectory of another vehicle
enters the corridor the victim is about to traverse (its centerline plus
half a lane width on each side), the victim must stop behind the crossing
point; stop-distance kinematics give the required deceleration, which is
bucketed into severity classes.  Comparing the verdicts for pre-attack and
post-attack predictions shows whether an attack changes the driving
decision rather than just a metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackResult
from .generate import HALF_LANE, LANE_WIDTH
from .metrics import DIRECTIONS
from .scene import Scene, unit_directions

SEVERITIES = ("none", "comfortable", "hard_brake", "emergency")

# Deceleration class boundaries (m/s^2): comfortable braking tops out at 4,
# anything beyond 10 exceeds normal driving.
COMFORT_MAX = 4.0
HARD_MAX = 10.0


@dataclass(frozen=True)
class AvState:
    """The victim vehicle at the prediction moment: pose, speed, and how
    much room it keeps to a stopping point."""

    position: np.ndarray
    heading: float
    velocity: float
    lane_width: float = LANE_WIDTH
    safety_margin: float = 2.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (2,):
            raise ValueError("position must be a 2-vector")
        object.__setattr__(self, "position", pos)
        if self.velocity < 0:
            raise ValueError("velocity must be >= 0")
        if self.lane_width <= 0:
            raise ValueError("lane_width must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be >= 0")


@dataclass(frozen=True)
class Crossing:
    """Where a predicted trajectory first enters the corridor.

    frame counts predicted points from 1; distance is measured from the
    victim along its direction of travel.  All fields are None when the
    prediction never enters.
    """

    frame: int | None = None
    point: np.ndarray | None = None
    distance: float | None = None

    def __bool__(self) -> bool:
        return self.frame is not None


def _entry_time(a: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float | None:
    # Earliest t in [0, 1] where a + t (b - a) is inside the box, or None.
    d = b - a
    t0, t1 = 0.0, 1.0
    for dim in range(2):
        if d[dim] == 0.0:
            if a[dim] < lo[dim] or a[dim] > hi[dim]:
                return None
            continue
        ta = (lo[dim] - a[dim]) / d[dim]
        tb = (hi[dim] - a[dim]) / d[dim]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return t0


def find_crossing(
    pred: np.ndarray, av: AvState, frequency_hz: float = 1.0
) -> Crossing:
    """First entry of a predicted (l_o, 2) trajectory into the corridor the
    victim traverses during the prediction horizon."""
    pred = np.asarray(pred, dtype=float)
    if pred.ndim != 2 or pred.shape[1] != 2 or pred.shape[0] < 1:
        raise ValueError("pred must have shape (l_o, 2)")
    if frequency_hz <= 0:
        raise ValueError("frequency_hz must be positive")
    u = np.array([np.cos(av.heading), np.sin(av.heading)])
    left = np.array([-u[1], u[0]])
    rel = pred - av.position
    local = np.stack([rel @ u, rel @ left], axis=1)

    span = av.velocity * pred.shape[0] / frequency_hz
    lo = np.array([0.0, -av.lane_width / 2.0])
    hi = np.array([span, av.lane_width / 2.0])

    if np.all(local[0] >= lo) and np.all(local[0] <= hi):
        return Crossing(frame=1, point=pred[0].copy(), distance=float(local[0, 0]))
    for k in range(1, pred.shape[0]):
        t = _entry_time(local[k - 1], local[k], lo, hi)
        if t is not None:
            entry_local = local[k - 1] + t * (local[k] - local[k - 1])
            entry_world = pred[k - 1] + t * (pred[k] - pred[k - 1])
            return Crossing(frame=k + 1, point=entry_world, distance=float(entry_local[0]))
    return Crossing()


def required_deceleration(av: AvState, crossing_distance: float) -> float:
    """Constant deceleration needed to stop safety_margin short of the
    crossing point; infinite when the point is already inside the margin."""
    if crossing_distance <= av.safety_margin:
        return float("inf")
    return av.velocity**2 / (2.0 * (crossing_distance - av.safety_margin))


def classify_severity(decel: float | None) -> str:
    """none (no braking needed), comfortable, hard_brake, or emergency."""
    if decel is None:
        return "none"
    if decel < 0:
        raise ValueError("deceleration must be >= 0")
    if decel <= COMFORT_MAX:
        return "comfortable"
    if decel <= HARD_MAX:
        return "hard_brake"
    return "emergency"


def severity_rank(severity: str) -> int:
    return SEVERITIES.index(severity)


@dataclass(frozen=True)
class ImpactVerdict:
    crossing: Crossing
    required_decel: float | None
    severity: str
    lane_deviation_flag: bool

    def as_dict(self) -> dict:
        return {
            "crossing_frame": self.crossing.frame,
            "crossing_distance": self.crossing.distance,
            "required_decel": self.required_decel,
            "severity": self.severity,
            "lane_deviation_flag": self.lane_deviation_flag,
        }


@dataclass(frozen=True)
class ImpactComparison:
    before: ImpactVerdict
    after: ImpactVerdict

    @property
    def escalated(self) -> bool:
        return severity_rank(self.after.severity) > severity_rank(self.before.severity)

    def as_dict(self) -> dict:
        return {"before": self.before.as_dict(), "after": self.after.as_dict()}


def assess_prediction(
    pred: np.ndarray,
    av: AvState,
    frequency_hz: float = 1.0,
    deviation: float = 0.0,
) -> ImpactVerdict:
    """Verdict for one predicted trajectory; deviation feeds the half-lane
    flag."""
    crossing = find_crossing(pred, av, frequency_hz)
    decel = required_deceleration(av, crossing.distance) if crossing else None
    return ImpactVerdict(
        crossing=crossing,
        required_decel=decel,
        severity=classify_severity(decel),
        lane_deviation_flag=deviation > HALF_LANE,
    )


def _flag_value(report, objective: str) -> float:
    if objective in DIRECTIONS:
        return report.value(objective)
    return max(report.value(d) for d in DIRECTIONS)


def impact_report(result: AttackResult, scene: Scene, av: AvState) -> ImpactComparison:
    """Planning verdicts for the pre- and post-attack predictions at the
    first evaluation frame, so reports show what the attack changed."""
    f = scene.frequency_hz
    before = assess_prediction(
        result.pred_before[0], av, f, _flag_value(result.before, result.config.objective)
    )
    after = assess_prediction(
        result.pred_after[0], av, f, _flag_value(result.after, result.config.objective)
    )
    return ImpactComparison(before=before, after=after)


def av_behind_target(
    scene: Scene,
    gap: float,
    velocity: float,
    lane_width: float = LANE_WIDTH,
    safety_margin: float = 2.0,
) -> AvState:
    """Victim placed ``gap`` meters behind the target's last observed
    position, heading the same way.  The standard following setup for
    fake-braking style impact studies."""
    pos = scene.target.positions
    idx = scene.l_i - 1
    u = unit_directions(pos, scene.frequency_hz)[idx]
    return AvState(
        position=pos[idx] - gap * u,
        heading=float(np.arctan2(u[1], u[0])),
        velocity=velocity,
        lane_width=lane_width,
        safety_margin=safety_margin,
    )
