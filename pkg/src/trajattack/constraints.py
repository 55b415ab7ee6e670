"""Feasibility constraints for trajectory perturbations.

A perturbation is a per-frame 2-D displacement added to the first k frames
of the target trajectory.  It is feasible when the perturbed motion stays
inside dataset-level physical bounds (speed, signed longitudinal and
lateral acceleration, their derivatives) and each per-frame displacement
stays below a deviation cap.  Bounds are symmetric magnitude limits
derived from dataset statistics as max(|mu + 3 sigma|, |mu - 3 sigma|).

Infeasible perturbations are repaired by uniform shrinking: find the
largest theta in [0, 1] such that theta * delta is feasible (coarse grid
scan plus bisection; feasibility along the ray is not guaranteed monotone
because the direction frames rotate with the perturbation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .scene import Scene, Trajectory, _kin_arrays

BOUND_FIELDS = ("max_speed", "max_long_accel", "max_lat_accel", "max_long_jerk", "max_lat_jerk")

PRESET_NAMES = ("apolloscape_like", "ngsim_like", "nuscenes_like")

# theta search: 64-point grid over [0, 1], then bisection on the largest
# feasible grid interval down to this width.
THETA_GRID = 64
THETA_TOL = 1e-3


@dataclass(frozen=True)
class PhysicalBounds:
    """Magnitude limits on the five differenced motion properties."""

    max_speed: float
    max_long_accel: float
    max_lat_accel: float
    max_long_jerk: float
    max_lat_jerk: float

    def __post_init__(self):
        for name in BOUND_FIELDS:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def as_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in BOUND_FIELDS}


def load_bounds(source: str | Path | dict) -> PhysicalBounds:
    """Bounds from a preset name, a JSON file, or a plain dict."""
    if isinstance(source, dict):
        data = source
    elif isinstance(source, str) and source in PRESET_NAMES:
        ref = resources.files("trajattack").joinpath(f"presets/{source}.json")
        data = json.loads(ref.read_text())
    else:
        data = json.loads(Path(source).read_text())
    missing = [name for name in BOUND_FIELDS if name not in data]
    if missing:
        raise ValueError(f"bounds file missing {missing}")
    return PhysicalBounds(**{name: float(data[name]) for name in BOUND_FIELDS})


def save_bounds(bounds: PhysicalBounds, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bounds.as_dict(), indent=1) + "\n")


def preset_bounds(name: str) -> PhysicalBounds:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown bounds preset {name!r}, have {PRESET_NAMES}")
    return load_bounds(name)


@dataclass(frozen=True)
class PerturbationConstraints:
    """Bounds plus the per-frame deviation cap and boundary context width."""

    bounds: PhysicalBounds
    max_deviation: float = 1.0
    context_frames: int = 3

    def __post_init__(self):
        if self.max_deviation <= 0:
            raise ValueError("max_deviation must be positive")
        if self.context_frames < 0:
            raise ValueError("context_frames must be >= 0")

    def with_deviation(self, max_deviation: float) -> "PerturbationConstraints":
        return replace(self, max_deviation=max_deviation)


@dataclass(frozen=True)
class Violation:
    frame: int
    prop: str
    value: float
    bound: float

    def __str__(self):
        return f"{self.prop}[{self.frame}] = {self.value:.4f} exceeds {self.bound:.4f}"


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    violations: tuple[Violation, ...] = ()

    def __bool__(self):
        return self.feasible


def estimate_bounds(scenes: list[Scene]) -> PhysicalBounds:
    """Pool per-frame motion values of every vehicle trajectory and bound
    each property by max(|mu + 3 sigma|, |mu - 3 sigma|).

    Population statistics; trajectories must be long enough for jerk
    (at least 4 frames).
    """
    pools: dict[str, list[np.ndarray]] = {name: [] for name in BOUND_FIELDS}
    count = 0
    for scene in scenes:
        for traj in scene.trajectories:
            if traj.kind != "vehicle":
                continue
            count += 1
            speed, a_long, a_lat, j_long, j_lat = _kin_arrays(
                traj.positions[None], scene.frequency_hz
            )
            pools["max_speed"].append(speed[0])
            pools["max_long_accel"].append(a_long[0])
            pools["max_lat_accel"].append(a_lat[0])
            pools["max_long_jerk"].append(j_long[0])
            pools["max_lat_jerk"].append(j_lat[0])
    if count == 0:
        raise ValueError("no vehicle trajectories to estimate bounds from")
    values = {}
    for name, chunks in pools.items():
        pooled = np.concatenate(chunks)
        mu = float(np.mean(pooled))
        sigma = float(np.std(pooled))
        # degenerate pools (straight constant-speed data) would produce a
        # zero bound, which PhysicalBounds rejects; floor keeps it usable
        values[name] = max(abs(mu + 3.0 * sigma), abs(mu - 3.0 * sigma), 1e-9)
    return PhysicalBounds(**values)


def _checked_segment(positions: np.ndarray, n_perturbed: int, context: int) -> np.ndarray:
    # Perturbations start at frame 0, so there is never context before; up
    # to `context` unperturbed frames after tie the repaired motion back
    # into the original trajectory.
    end = min(positions.shape[0], n_perturbed + context)
    return positions[:end]


def _feasible_mask(
    base_segment: np.ndarray,
    deltas: np.ndarray,
    frequency_hz: float,
    cons: PerturbationConstraints,
) -> np.ndarray:
    """Vectorized feasibility over a batch of perturbations.

    base_segment: (T, 2) positions already cut to perturbed prefix plus
    context.  deltas: (B, K, 2) with K <= T.  Returns a (B,) bool mask.
    """
    b, k, _ = deltas.shape
    pos = np.broadcast_to(base_segment, (b,) + base_segment.shape).copy()
    pos[:, :k] += deltas
    dev_ok = np.all(np.linalg.norm(deltas, axis=2) <= cons.max_deviation, axis=1)
    speed, a_long, a_lat, j_long, j_lat = _kin_arrays(pos, frequency_hz)
    bounds = cons.bounds
    ok = dev_ok
    ok = ok & np.all(speed <= bounds.max_speed, axis=1)
    ok = ok & np.all(np.abs(a_long) <= bounds.max_long_accel, axis=1)
    ok = ok & np.all(np.abs(a_lat) <= bounds.max_lat_accel, axis=1)
    ok = ok & np.all(np.abs(j_long) <= bounds.max_long_jerk, axis=1)
    ok = ok & np.all(np.abs(j_lat) <= bounds.max_lat_jerk, axis=1)
    return ok


def _collect_violations(
    base_segment: np.ndarray,
    delta: np.ndarray,
    frequency_hz: float,
    cons: PerturbationConstraints,
) -> list[Violation]:
    pos = base_segment.copy()
    k = delta.shape[0]
    pos[:k] += delta
    out: list[Violation] = []
    dev = np.linalg.norm(delta, axis=1)
    for i in np.flatnonzero(dev > cons.max_deviation):
        out.append(Violation(int(i), "deviation", float(dev[i]), cons.max_deviation))
    speed, a_long, a_lat, j_long, j_lat = _kin_arrays(pos[None], frequency_hz)
    checks = [
        ("speed", speed[0], cons.bounds.max_speed, False),
        ("long_accel", a_long[0], cons.bounds.max_long_accel, True),
        ("lat_accel", a_lat[0], cons.bounds.max_lat_accel, True),
        ("long_jerk", j_long[0], cons.bounds.max_long_jerk, True),
        ("lat_jerk", j_lat[0], cons.bounds.max_lat_jerk, True),
    ]
    for name, series, bound, signed in checks:
        mag = np.abs(series) if signed else series
        for i in np.flatnonzero(mag > bound):
            out.append(Violation(int(i), name, float(series[i]), float(bound)))
    return out


def feasible_positions(
    positions: np.ndarray,
    delta: np.ndarray,
    frequency_hz: float,
    cons: PerturbationConstraints,
) -> Feasibility:
    """Feasibility of a perturbation against bare position data."""
    positions = np.asarray(positions, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2 or delta.shape[1] != 2:
        raise ValueError("delta must have shape (k, 2)")
    if delta.shape[0] > positions.shape[0]:
        raise ValueError("delta longer than the trajectory")
    segment = _checked_segment(positions, delta.shape[0], cons.context_frames)
    if segment.shape[0] < 4:
        raise ValueError("perturbed segment too short for kinematics")
    violations = _collect_violations(segment, delta, frequency_hz, cons)
    return Feasibility(not violations, tuple(violations))


def check_feasible(scene: Scene, delta: np.ndarray, cons: PerturbationConstraints) -> Feasibility:
    """Verdict with a violation list for a perturbation of the scene target.

    The checked segment is the perturbed prefix plus up to
    ``cons.context_frames`` following unperturbed points, so repaired
    motion must blend into the original trajectory, not just be smooth
    internally.
    """
    return feasible_positions(scene.target.positions, delta, scene.frequency_hz, cons)


def project_positions(
    positions: np.ndarray,
    delta: np.ndarray,
    frequency_hz: float,
    cons: PerturbationConstraints,
) -> tuple[np.ndarray, float]:
    """Largest feasible uniform shrink of ``delta`` against bare positions.

    Returns (theta * delta, theta).  theta = 0 (the natural trajectory) is
    always treated as feasible.
    """
    positions = np.asarray(positions, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 2 or delta.shape[1] != 2:
        raise ValueError("delta must have shape (k, 2)")
    segment = _checked_segment(positions, delta.shape[0], cons.context_frames)
    if segment.shape[0] < 4:
        raise ValueError("perturbed segment too short for kinematics")

    thetas = np.linspace(0.0, 1.0, THETA_GRID)
    mask = _feasible_mask(segment, thetas[:, None, None] * delta[None], frequency_hz, cons)
    mask[0] = True
    last = int(np.max(np.flatnonzero(mask)))
    if last == THETA_GRID - 1:
        return delta.copy(), 1.0

    lo, hi = thetas[last], thetas[last + 1]
    while hi - lo > THETA_TOL:
        mid = 0.5 * (lo + hi)
        if _feasible_mask(segment, (mid * delta)[None], frequency_hz, cons)[0]:
            lo = mid
        else:
            hi = mid
    return lo * delta, float(lo)


def project(scene: Scene, delta: np.ndarray, cons: PerturbationConstraints) -> tuple[np.ndarray, float]:
    """Uniformly shrink a perturbation of the scene target until feasible."""
    return project_positions(scene.target.positions, delta, scene.frequency_hz, cons)
