"""Synthetic scene generation.

Each scene family is a closed-form motion profile (plus a fixed-substep
integration for turns) sampled at the preset rate: straight cruising, a
single lane change of one lane width, a turn, a smooth stop, and a smooth
acceleration.  Speed and shape parameters are drawn from per-preset ranges
chosen so that every generated trajectory, target and neighbors alike,
stays well inside the preset physical bounds.  Generation is a pure
function of (preset, family, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import PhysicalBounds, preset_bounds
from .scene import Scene, Trajectory

FAMILIES = ("straight", "lane_change", "turn", "stop", "accelerate")

LANE_WIDTH = 3.7

# Half a lane width: deviations beyond this push a centered vehicle out of
# its lane.
HALF_LANE = LANE_WIDTH / 2.0

DEFAULT_EXTRA_FRAMES = 5


@dataclass(frozen=True)
class DatasetPreset:
    """History length, horizon length, and sample rate of a dataset family."""

    name: str
    l_i: int
    l_o: int
    frequency_hz: float

    @property
    def bounds(self) -> PhysicalBounds:
        return preset_bounds(self.name)


PRESETS = {
    "apolloscape_like": DatasetPreset("apolloscape_like", 6, 6, 2.0),
    "ngsim_like": DatasetPreset("ngsim_like", 15, 25, 5.0),
    "nuscenes_like": DatasetPreset("nuscenes_like", 4, 12, 2.0),
}

# Cruise speed ranges (m/s).  The tighter stop/turn ranges keep the
# differenced acceleration and jerk inside the narrow ngsim/nuscenes
# bounds at the shortest supported scene duration.
_SPEED = {
    "apolloscape_like": (3.0, 12.0),
    "ngsim_like": (5.0, 14.0),
    "nuscenes_like": (3.0, 10.0),
}
_STOP_SPEED = {
    "apolloscape_like": (3.0, 8.0),
    "ngsim_like": (2.5, 4.2),
    "nuscenes_like": (3.0, 6.0),
}
_ACCEL_DELTA = {
    "apolloscape_like": (2.0, 6.0),
    "ngsim_like": (1.5, 4.0),
    "nuscenes_like": (2.0, 5.0),
}
# (speed range, total heading change range in radians)
_TURN = {
    "apolloscape_like": ((2.5, 3.8), (0.8, np.pi / 2)),
    "ngsim_like": ((3.5, 5.4), (0.25, 0.4)),
    "nuscenes_like": ((1.8, 2.3), (1.0, np.pi / 2)),
}


def _smoothstep(tau: np.ndarray) -> np.ndarray:
    tau = np.clip(tau, 0.0, 1.0)
    return tau * tau * (3.0 - 2.0 * tau)


def _smoothstep_integral(tau: np.ndarray) -> np.ndarray:
    # Integral of _smoothstep from 0, clamped past tau = 1.
    tau_c = np.clip(tau, 0.0, 1.0)
    inner = tau_c**3 - 0.5 * tau_c**4
    return inner + np.maximum(tau - 1.0, 0.0)


def _frame(heading: float) -> tuple[np.ndarray, np.ndarray]:
    u = np.array([np.cos(heading), np.sin(heading)])
    return u, np.array([-u[1], u[0]])


def _straight(t: np.ndarray, speed: float) -> np.ndarray:
    return np.stack([speed * t, np.zeros_like(t)], axis=1)


def _lane_change(t: np.ndarray, speed: float, direction: float) -> np.ndarray:
    duration = t[-1]
    lateral = direction * LANE_WIDTH * _smoothstep(t / duration)
    return np.stack([speed * t, lateral], axis=1)


def _speed_ramp(t: np.ndarray, v0: float, v1: float, ramp_end: float) -> np.ndarray:
    # Arc length of a smoothstep speed transition from v0 to v1 over
    # [0, ramp_end], constant v1 afterwards.
    tau = t / ramp_end
    arc = v0 * np.minimum(t, ramp_end) + (v1 - v0) * ramp_end * _smoothstep_integral(np.minimum(tau, 1.0))
    arc = arc + v1 * np.maximum(t - ramp_end, 0.0)
    return np.stack([arc, np.zeros_like(arc)], axis=1)


def _turn(t: np.ndarray, speed: float, total_angle: float) -> np.ndarray:
    # Yaw rate ramps in and out with a smoothstep profile; positions come
    # from fixed-substep midpoint integration so the result is a pure
    # function of the parameters.
    duration = t[-1]
    substeps = 32
    n = len(t)
    out = np.zeros((n, 2))
    pos = np.zeros(2)
    for i in range(1, n):
        lo, hi = t[i - 1], t[i]
        dt = (hi - lo) / substeps
        mids = lo + (np.arange(substeps) + 0.5) * dt
        psi = total_angle * _smoothstep(mids / duration)
        step = speed * dt * np.stack([np.cos(psi), np.sin(psi)], axis=1)
        pos = pos + step.sum(axis=0)
        out[i] = pos
    return out


def _target_path(family: str, preset: DatasetPreset, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if family == "straight":
        speed = rng.uniform(*_SPEED[preset.name])
        return _straight(t, speed)
    if family == "lane_change":
        speed = rng.uniform(*_SPEED[preset.name])
        direction = rng.choice([-1.0, 1.0])
        return _lane_change(t, speed, direction)
    if family == "turn":
        (v_lo, v_hi), (a_lo, a_hi) = _TURN[preset.name]
        speed = rng.uniform(v_lo, v_hi)
        angle = rng.uniform(a_lo, a_hi) * rng.choice([-1.0, 1.0])
        return _turn(t, speed, angle)
    if family == "stop":
        v0 = rng.uniform(*_STOP_SPEED[preset.name])
        return _speed_ramp(t, v0, 0.0, ramp_end=0.75 * t[-1])
    if family == "accelerate":
        v0 = rng.uniform(*_SPEED[preset.name])
        dv = rng.uniform(*_ACCEL_DELTA[preset.name])
        return _speed_ramp(t, v0, v0 + dv, ramp_end=t[-1])
    raise ValueError(f"unknown scene family {family!r}, have {FAMILIES}")


def generate_scene(
    preset: str | DatasetPreset,
    family: str,
    seed: int,
    *,
    extra_frames: int = DEFAULT_EXTRA_FRAMES,
    n_neighbors: int | None = None,
) -> Scene:
    """One synthetic scene: a target vehicle following the family profile
    plus 0 to 5 straight-driving neighbor vehicles.

    The scene has l_i + l_o + extra_frames frames, so the default supports
    attacks that evaluate up to extra_frames + 1 prediction frames.  Equal
    arguments reproduce the scene exactly.
    """
    if isinstance(preset, str):
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}, have {tuple(PRESETS)}")
        preset = PRESETS[preset]
    if family not in FAMILIES:
        raise ValueError(f"unknown scene family {family!r}, have {FAMILIES}")
    if extra_frames < 0:
        raise ValueError("extra_frames must be >= 0")

    rng = np.random.default_rng([seed, hash_label(preset.name), hash_label(family)])
    n_frames = preset.l_i + preset.l_o + extra_frames
    t = np.arange(n_frames) / preset.frequency_hz

    heading = rng.uniform(0.0, 2.0 * np.pi)
    origin = rng.uniform(-30.0, 30.0, size=2)
    u, left = _frame(heading)

    local = _target_path(family, preset, t, rng)
    target_pos = origin + local[:, :1] * u + local[:, 1:] * left
    trajectories = [Trajectory("target", "vehicle", target_pos)]

    count = int(rng.integers(0, 6)) if n_neighbors is None else n_neighbors
    if not 0 <= count <= 5:
        raise ValueError("n_neighbors must be in 0..5")
    for i in range(count):
        speed = rng.uniform(*_SPEED[preset.name])
        same_way = rng.random() < 0.75
        nbr_heading = heading + rng.normal(0.0, 0.05) + (0.0 if same_way else np.pi)
        lane = rng.choice([-2.0, -1.0, 1.0, 2.0]) * LANE_WIDTH
        along = rng.uniform(-40.0, 40.0)
        nu, _ = _frame(nbr_heading)
        start = origin + along * u + (lane + rng.normal(0.0, 0.3)) * left
        pos = start + speed * t[:, None] * nu
        trajectories.append(Trajectory(f"nbr{i}", "vehicle", pos))

    return Scene(
        frequency_hz=preset.frequency_hz,
        l_i=preset.l_i,
        l_o=preset.l_o,
        target_id="target",
        trajectories=tuple(trajectories),
        scene_id=f"{preset.name}_{family}_{seed:05d}",
    )


def hash_label(label: str) -> int:
    # Stable small integer from a string, for seeding streams.  Python's
    # hash() is salted per process, so roll a tiny FNV-1a instead.
    h = 2166136261
    for b in label.encode():
        h = ((h ^ b) * 16777619) & 0xFFFFFFFF
    return h


def generate_corpus(
    preset: str | DatasetPreset,
    seed: int,
    count: int = 100,
    families: tuple[str, ...] = FAMILIES,
    *,
    extra_frames: int = DEFAULT_EXTRA_FRAMES,
) -> list[Scene]:
    """``count`` scenes cycling round-robin through ``families``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bad = [f for f in families if f not in FAMILIES]
    if bad:
        raise ValueError(f"unknown scene families {bad}")
    return [
        generate_scene(
            preset,
            families[i % len(families)],
            seed * 1_000_003 + i,
            extra_frames=extra_frames,
        )
        for i in range(count)
    ]
