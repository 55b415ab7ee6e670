"""Trajectory and scene primitives.

Positions are 2-D points in meters sampled at a fixed rate, so frame i
corresponds to time i / frequency_hz.  A scene is a set of object
trajectories over a common frame range 0..n_frames-1 with one designated
prediction target.  Kinematic quantities are reconstructed by finite
differencing: speed from first differences, acceleration from second,
jerk from third, each difference scaled by the sample rate.  Acceleration
and jerk are decomposed into signed longitudinal (along the direction of
travel) and lateral (along the left normal) components.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OBJECT_KINDS = ("vehicle", "pedestrian", "other")

# Below this speed (m/s) a frame has no usable direction of travel.
SPEED_EPS = 1e-6


class SceneFormatError(ValueError):
    """A scene file failed parsing or validation."""


@dataclass(frozen=True)
class ObjectState:
    """One object at one frame."""

    frame: int
    x: float
    y: float
    heading: float | None = None

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """Positions of one object at consecutive frames starting from 0.

    Parameters
    ----------
    object_id : str
    kind : str
        One of ``vehicle``, ``pedestrian``, ``other``.
    positions : ndarray, shape (n_frames, 2)
        Coordinates in meters, finite, at least two frames.
    headings : ndarray, shape (n_frames,), optional
        Observed headings in radians.  When absent they are reconstructed
        from the velocity direction on demand.
    """

    object_id: str
    kind: str
    positions: np.ndarray
    headings: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 2:
            raise ValueError(
                f"positions must have shape (n, 2) with n >= 2, got {pos.shape}"
            )
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"object {self.object_id!r} has non-finite coordinates")
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"unknown object kind {self.kind!r}")
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.headings is not None:
            h = np.asarray(self.headings, dtype=float)
            if h.shape != (pos.shape[0],):
                raise ValueError("headings length must match positions")
            h = h.copy()
            h.setflags(write=False)
            object.__setattr__(self, "headings", h)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    def state(self, frame: int) -> ObjectState:
        x, y = self.positions[frame]
        h = None if self.headings is None else float(self.headings[frame])
        return ObjectState(frame=frame, x=float(x), y=float(y), heading=h)

    @property
    def states(self) -> tuple[ObjectState, ...]:
        return tuple(self.state(i) for i in range(self.n_frames))

    def effective_headings(self) -> np.ndarray:
        """Stored headings, or headings reconstructed from velocity direction."""
        if self.headings is not None:
            return self.headings
        u = unit_directions(self.positions)
        return np.arctan2(u[:, 1], u[:, 0])

    def with_positions(self, positions: np.ndarray) -> "Trajectory":
        """Copy with replaced coordinates.  Stored headings are dropped
        because they no longer describe the new motion."""
        return Trajectory(self.object_id, self.kind, positions)


def unit_directions(positions: np.ndarray, frequency_hz: float = 1.0) -> np.ndarray:
    """Per-frame unit direction of travel, shape (n, 2).

    Frame i points along the segment to frame i+1; the last frame reuses
    the segment from its predecessor.  Frames slower than SPEED_EPS keep
    the most recent valid direction, or (1, 0) when none has occurred yet.
    """
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    if n == 1:
        return np.array([[1.0, 0.0]])
    out = _batch_unit_directions(pos[None], frequency_hz)
    return out[0]


def _batch_unit_directions(pos: np.ndarray, frequency_hz: float) -> np.ndarray:
    # pos: (B, T, 2) -> (B, T, 2).  Sequential scan over T for the
    # carry-forward rule on degenerate frames.
    b, n, _ = pos.shape
    seg = np.diff(pos, axis=1)
    out = np.empty((b, n, 2))
    current = np.tile(np.array([1.0, 0.0]), (b, 1))
    for i in range(n):
        d = seg[:, i] if i < n - 1 else seg[:, -1]
        norm = np.linalg.norm(d, axis=1)
        ok = norm * frequency_hz >= SPEED_EPS
        safe = np.maximum(norm, 1e-300)
        current = np.where(ok[:, None], d / safe[:, None], current)
        out[:, i] = current
    return out


def left_normal(u: np.ndarray) -> np.ndarray:
    """+90 degree rotation of each vector: the left-hand lane normal."""
    u = np.asarray(u, dtype=float)
    return np.stack([-u[..., 1], u[..., 0]], axis=-1)


@dataclass(frozen=True)
class KinematicProfile:
    """Signed per-frame kinematics of one trajectory.

    Lengths follow the differencing order: speed has n-1 entries,
    accelerations n-2, jerks n-3.
    """

    speed: np.ndarray
    long_accel: np.ndarray
    lat_accel: np.ndarray
    long_jerk: np.ndarray
    lat_jerk: np.ndarray


def kinematics(trajectory: Trajectory | np.ndarray, frequency_hz: float) -> KinematicProfile:
    """Differenced speed, acceleration, and jerk profiles.

    Parameters
    ----------
    trajectory : Trajectory or ndarray, shape (n, 2)
        At least four frames.
    frequency_hz : float
        Sample rate, > 0.

    Returns
    -------
    KinematicProfile
    """
    pos = trajectory.positions if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if frequency_hz <= 0:
        raise ValueError("frequency_hz must be positive")
    if pos.ndim != 2 or pos.shape[0] < 4:
        raise ValueError("trajectory too short for kinematics, need at least 4 frames")
    speed, a_long, a_lat, j_long, j_lat = _kin_arrays(pos[None], frequency_hz)
    return KinematicProfile(speed[0], a_long[0], a_lat[0], j_long[0], j_lat[0])


def _kin_arrays(pos: np.ndarray, f: float):
    # pos: (B, T, 2).  Returns speed (B, T-1), accelerations (B, T-2),
    # jerks (B, T-3).  Acceleration at index i is decomposed along the
    # direction of travel at frame i.
    vel = np.diff(pos, axis=1) * f
    speed = np.linalg.norm(vel, axis=2)
    u = _batch_unit_directions(pos, f)
    acc = np.diff(vel, axis=1) * f
    ua = u[:, : acc.shape[1]]
    left = left_normal(ua)
    a_long = np.einsum("bij,bij->bi", acc, ua)
    a_lat = np.einsum("bij,bij->bi", acc, left)
    j_long = np.diff(a_long, axis=1) * f
    j_lat = np.diff(a_lat, axis=1) * f
    return speed, a_long, a_lat, j_long, j_lat


@dataclass(frozen=True)
class Scene:
    """Aligned object trajectories with one designated prediction target.

    Invariants enforced at construction: positive sample rate, all objects
    covering the identical frame range, at least l_i + l_o frames, and a
    target that exists and is a vehicle.
    """

    frequency_hz: float
    l_i: int
    l_o: int
    target_id: str
    trajectories: tuple[Trajectory, ...]
    scene_id: str = "scene"

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ValueError("frequency_hz must be positive")
        if self.l_i < 2 or self.l_o < 1:
            raise ValueError("need l_i >= 2 and l_o >= 1")
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ValueError("scene has no objects")
        object.__setattr__(self, "trajectories", trajs)
        lengths = {t.n_frames for t in trajs}
        if len(lengths) != 1:
            raise ValueError("objects must share a common frame range")
        n = lengths.pop()
        if n < self.l_i + self.l_o:
            raise ValueError(
                f"scene has {n} frames, needs at least l_i + l_o = {self.l_i + self.l_o}"
            )
        ids = [t.object_id for t in trajs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")
        target = next((t for t in trajs if t.object_id == self.target_id), None)
        if target is None:
            raise ValueError(f"target {self.target_id!r} not present in scene")
        if target.kind != "vehicle":
            raise ValueError(f"target {self.target_id!r} must be a vehicle")

    @property
    def n_frames(self) -> int:
        return self.trajectories[0].n_frames

    @property
    def target(self) -> Trajectory:
        return next(t for t in self.trajectories if t.object_id == self.target_id)

    @property
    def others(self) -> tuple[Trajectory, ...]:
        return tuple(t for t in self.trajectories if t.object_id != self.target_id)

    def trajectory(self, object_id: str) -> Trajectory:
        for t in self.trajectories:
            if t.object_id == object_id:
                return t
        raise KeyError(object_id)

    def with_target_delta(self, delta: np.ndarray) -> "Scene":
        """Copy of the scene with ``delta`` added to the first len(delta)
        frames of the target trajectory."""
        delta = np.asarray(delta, dtype=float)
        if delta.ndim != 2 or delta.shape[1] != 2:
            raise ValueError("delta must have shape (k, 2)")
        tgt = self.target
        if delta.shape[0] > tgt.n_frames:
            raise ValueError("delta longer than the trajectory")
        pos = tgt.positions.copy()
        pos[: delta.shape[0]] += delta
        new = tgt.with_positions(pos)
        return Scene(
            frequency_hz=self.frequency_hz,
            l_i=self.l_i,
            l_o=self.l_o,
            target_id=self.target_id,
            trajectories=tuple(new if t.object_id == self.target_id else t for t in self.trajectories),
            scene_id=self.scene_id,
        )


def scene_to_dict(scene: Scene) -> dict:
    objects = []
    for t in scene.trajectories:
        states = []
        for i in range(t.n_frames):
            s = {"frame": i, "x": float(t.positions[i, 0]), "y": float(t.positions[i, 1])}
            if t.headings is not None:
                s["heading"] = float(t.headings[i])
            states.append(s)
        objects.append({"id": t.object_id, "kind": t.kind, "states": states})
    return {
        "scene_id": scene.scene_id,
        "frequency_hz": scene.frequency_hz,
        "l_i": scene.l_i,
        "l_o": scene.l_o,
        "target_id": scene.target_id,
        "objects": objects,
    }


def _reindex(frames: list[int], object_id: str, offset: int) -> None:
    # Frames must be consecutive after subtracting the scene-wide offset.
    prev = None
    for f in frames:
        if prev is not None and f != prev + 1:
            raise SceneFormatError(
                f"object {object_id!r} missing frame {prev + 1 + offset}"
            )
        prev = f


def scene_from_dict(data: dict, scene_id: str | None = None) -> Scene:
    for key in ("frequency_hz", "l_i", "l_o", "target_id", "objects"):
        if key not in data:
            raise SceneFormatError(f"missing key {key!r}")
    if not data["objects"]:
        raise SceneFormatError("scene has no objects")

    all_frames = [int(s["frame"]) for obj in data["objects"] for s in obj.get("states", [])]
    if not all_frames:
        raise SceneFormatError("scene has no states")
    offset = min(all_frames)

    trajectories = []
    for obj in data["objects"]:
        oid = str(obj.get("id"))
        kind = obj.get("kind", "vehicle")
        states = sorted(obj.get("states", []), key=lambda s: int(s["frame"]))
        if len(states) < 2:
            raise SceneFormatError(f"object {oid!r} has fewer than 2 states")
        frames = [int(s["frame"]) - offset for s in states]
        if len(set(frames)) != len(frames):
            raise SceneFormatError(f"object {oid!r} has duplicate frames")
        _reindex(frames, oid, offset)
        try:
            pos = np.array([[float(s["x"]), float(s["y"])] for s in states])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"object {oid!r}: bad state coordinates ({exc})") from None
        with_heading = [s for s in states if "heading" in s]
        if with_heading and len(with_heading) != len(states):
            raise SceneFormatError(f"object {oid!r} has headings on only some frames")
        headings = np.array([float(s["heading"]) for s in states]) if with_heading else None
        if frames[0] != 0:
            raise SceneFormatError(
                f"object {oid!r} does not cover the common frame range"
            )
        trajectories.append(Trajectory(oid, kind, pos, headings))

    try:
        return Scene(
            frequency_hz=float(data["frequency_hz"]),
            l_i=int(data["l_i"]),
            l_o=int(data["l_o"]),
            target_id=str(data["target_id"]),
            trajectories=tuple(trajectories),
            scene_id=scene_id or str(data.get("scene_id", "scene")),
        )
    except ValueError as exc:
        raise SceneFormatError(str(exc)) from None


CSV_HEADER = ["object_id", "kind", "frame", "x", "y"]


def _scene_from_csv(path: Path, frequency_hz, l_i, l_o, target_id) -> Scene:
    if frequency_hz is None or l_i is None or l_o is None or target_id is None:
        raise SceneFormatError(
            "csv scenes need frequency_hz, l_i, l_o, and target_id supplied separately"
        )
    rows: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise SceneFormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise SceneFormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            oid, kind, frame, x, y = row
            try:
                state = {"frame": int(frame), "x": float(x), "y": float(y)}
            except ValueError as exc:
                raise SceneFormatError(f"{path}:{lineno}: {exc}") from None
            entry = rows.setdefault(oid, {"id": oid, "kind": kind, "states": []})
            entry["states"].append(state)
    data = {
        "frequency_hz": frequency_hz,
        "l_i": l_i,
        "l_o": l_o,
        "target_id": target_id,
        "objects": list(rows.values()),
    }
    return scene_from_dict(data, scene_id=path.stem)


def load_scene(
    source: str | Path,
    *,
    frequency_hz: float | None = None,
    l_i: int | None = None,
    l_o: int | None = None,
    target_id: str | None = None,
) -> Scene:
    """Load a scene from a .json or .csv file.

    JSON files are self-describing.  CSV files carry only
    object_id,kind,frame,x,y rows, so the scene-level parameters must be
    given as keyword arguments.  Frames are re-indexed to start at 0.
    """
    path = Path(source)
    if not path.exists():
        raise SceneFormatError(f"no such scene file: {path}")
    if path.suffix == ".csv":
        return _scene_from_csv(path, frequency_hz, l_i, l_o, target_id)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SceneFormatError(f"{path}: top level must be an object")
    try:
        return scene_from_dict(data, scene_id=path.stem)
    except SceneFormatError as exc:
        raise SceneFormatError(f"{path}: {exc}") from None


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write a scene to .json (full fidelity) or .csv (coordinates only)."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for t in scene.trajectories:
                for i in range(t.n_frames):
                    writer.writerow(
                        [t.object_id, t.kind, i, repr(float(t.positions[i, 0])), repr(float(t.positions[i, 1]))]
                    )
        return
    path.write_text(json.dumps(scene_to_dict(scene), indent=1) + "\n")
