import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from trajattack import (
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

from conftest import make_straight_scene, straight_positions


def test_trajectory_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError):
        Trajectory("a", "vehicle", np.zeros((1, 2)))  # single frame
    with pytest.raises(ValueError):
        Trajectory("a", "vehicle", np.zeros((4, 3)))  # not planar
    with pytest.raises(ValueError):
        Trajectory("a", "vehicle", np.array([[0.0, 0.0], [np.nan, 1.0]]))
    with pytest.raises(ValueError):
        Trajectory("a", "bicycle", np.zeros((4, 2)))  # unknown kind
    with pytest.raises(ValueError):
        Trajectory("a", "vehicle", np.zeros((4, 2)), headings=np.zeros(3))


def test_trajectory_positions_are_frozen():
    tr = Trajectory("a", "vehicle", np.zeros((4, 2)))
    with pytest.raises(ValueError):
        tr.positions[0, 0] = 1.0


def test_trajectory_does_not_alias_caller_array():
    pos = np.zeros((4, 2))
    tr = Trajectory("a", "vehicle", pos)
    pos[0, 0] = 99.0
    assert tr.positions[0, 0] == 0.0


def test_unit_directions_straight_line():
    pos = straight_positions(6, speed=5.0, f=2.0, direction=(0.0, 1.0))
    u = unit_directions(pos, 2.0)
    # every frame points along +y, including the final carried-over frame
    assert_allclose(u, np.tile([0.0, 1.0], (6, 1)), atol=1e-12)


def test_unit_directions_carry_forward_and_default():
    # stationary prefix -> default (1, 0) until the first real move
    pos = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    u = unit_directions(pos, 1.0)
    assert_array_equal(u[0], [1.0, 0.0])
    assert_array_equal(u[1], [0.0, 1.0])
    # frames 2 and 3 have no forward motion: keep the last valid direction
    assert_array_equal(u[2], [0.0, 1.0])
    assert_array_equal(u[3], [0.0, 1.0])


def test_unit_directions_single_point():
    u = unit_directions(np.array([[3.0, 4.0]]))
    assert_array_equal(u, [[1.0, 0.0]])


def test_left_normal_is_quarter_turn():
    u = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    n = left_normal(u)
    assert_allclose(n, [[0.0, 1.0], [-1.0, 0.0], [-np.sqrt(0.5), np.sqrt(0.5)]])
    # rotating left twice reverses the vector
    assert_allclose(left_normal(n), -u)


def test_kinematics_hand_example():
    # speeds 1, 2, 3 -> accel 1, 1 -> jerk 0, all longitudinal
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [6.0, 0.0]])
    k = kinematics(pos, 1.0)
    assert_allclose(k.speed, [1.0, 2.0, 3.0])
    assert_allclose(k.long_accel, [1.0, 1.0])
    assert_allclose(k.lat_accel, [0.0, 0.0])
    assert_allclose(k.long_jerk, [0.0])
    assert_allclose(k.lat_jerk, [0.0])


def test_kinematics_scales_with_frequency():
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [6.0, 0.0]])
    k1 = kinematics(pos, 1.0)
    k2 = kinematics(pos, 2.0)
    assert_allclose(k2.speed, 2.0 * k1.speed)
    assert_allclose(k2.long_accel, 4.0 * k1.long_accel)
    assert_allclose(k2.long_jerk, 8.0 * k1.long_jerk)


def test_kinematics_circular_motion_is_lateral():
    # constant angular speed on a circle: speed constant, acceleration
    # centripetal (pointing left of travel for counter-clockwise motion)
    r, n, f = 20.0, 40, 10.0
    ang = np.arange(n) / f * 0.5  # 0.5 rad/s
    pos = r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    k = kinematics(pos, f)
    v = r * 0.5
    assert_allclose(k.speed, np.full(n - 1, v * np.sinc(0.5 / (2 * f) / np.pi)), rtol=1e-3)
    # centripetal magnitude v^2 / r, positive lateral sign (left), tiny
    # longitudinal component from discretization only
    assert_allclose(k.lat_accel, np.full(n - 2, v * v / r), rtol=2e-2)
    assert np.max(np.abs(k.long_accel)) < 0.05 * v * v / r


def test_kinematics_needs_four_frames_and_positive_rate():
    with pytest.raises(ValueError):
        kinematics(np.zeros((3, 2)), 1.0)
    with pytest.raises(ValueError):
        kinematics(np.zeros((5, 2)), 0.0)


def test_scene_validation():
    pos = straight_positions(12)
    ok = Trajectory("t", "vehicle", pos)
    with pytest.raises(ValueError, match="share a common frame range"):
        Scene(2.0, 6, 6, "t", (ok, Trajectory("o", "vehicle", pos[:6])))
    with pytest.raises(ValueError, match="needs at least"):
        Scene(2.0, 8, 8, "t", (ok,))
    with pytest.raises(ValueError, match="duplicate"):
        Scene(2.0, 6, 6, "t", (ok, Trajectory("t", "vehicle", pos)))
    with pytest.raises(ValueError, match="not present"):
        Scene(2.0, 6, 6, "missing", (ok,))
    with pytest.raises(ValueError, match="must be a vehicle"):
        Scene(2.0, 6, 6, "p", (ok, Trajectory("p", "pedestrian", pos)))
    with pytest.raises(ValueError):
        Scene(0.0, 6, 6, "t", (ok,))


def test_with_target_delta_touches_only_target_prefix():
    scene = make_straight_scene(neighbors=1)
    delta = np.zeros((6, 2))
    delta[2] = [0.5, -0.25]
    moved = scene.with_target_delta(delta)
    assert_allclose(moved.target.positions[2], scene.target.positions[2] + [0.5, -0.25])
    # all other frames and all other objects untouched
    mask = np.ones(scene.n_frames, dtype=bool)
    mask[2] = False
    assert_array_equal(moved.target.positions[mask], scene.target.positions[mask])
    assert_array_equal(moved.trajectory("nbr0").positions, scene.trajectory("nbr0").positions)
    # original is immutable, so the source scene is unchanged
    assert_array_equal(scene.target.positions[2], straight_positions(17)[2])


def test_scene_dict_round_trip_preserves_coordinates():
    scene = make_straight_scene(neighbors=2)
    data = scene_to_dict(scene)
    back = scene_from_dict(json.loads(json.dumps(data)), scene_id=scene.scene_id)
    assert back.frequency_hz == scene.frequency_hz
    assert back.l_i == scene.l_i and back.l_o == scene.l_o
    assert back.target_id == scene.target_id
    for t in scene.trajectories:
        assert_array_equal(back.trajectory(t.object_id).positions, t.positions)


def test_scene_json_file_round_trip(tmp_path):
    scene = make_straight_scene()
    path = tmp_path / "s.json"
    save_scene(scene, path)
    back = load_scene(path)
    # the filename stem names the scene, positions survive exactly
    assert back.scene_id == "s"
    assert_array_equal(back.target.positions, scene.target.positions)


def _states(frames, xs, ys):
    return [{"frame": f, "x": x, "y": y} for f, x, y in zip(frames, xs, ys)]


def test_scene_frames_reindexed_from_nonzero_start():
    data = {
        "frequency_hz": 1.0,
        "l_i": 2,
        "l_o": 2,
        "target_id": "a",
        "objects": [
            {"id": "a", "kind": "vehicle",
             "states": _states([5, 6, 7, 8], [0.0, 1.0, 2.0, 3.0], [0.0] * 4)}
        ],
    }
    scene = scene_from_dict(data)
    assert scene.n_frames == 4
    assert_allclose(scene.target.positions[:, 0], [0.0, 1.0, 2.0, 3.0])


def test_scene_gap_is_named_in_error():
    data = {
        "frequency_hz": 1.0,
        "l_i": 2,
        "l_o": 2,
        "target_id": "a",
        "objects": [
            {"id": "a", "kind": "vehicle",
             "states": _states([0, 1, 3, 4], [0.0, 1.0, 2.0, 3.0], [0.0] * 4)}
        ],
    }
    with pytest.raises(SceneFormatError, match="'a'.*frame 2"):
        scene_from_dict(data)


def test_scene_csv_round_trip(tmp_path):
    scene = make_straight_scene(neighbors=1)
    path = tmp_path / "s.csv"
    save_scene(scene, path)
    back = load_scene(path, frequency_hz=scene.frequency_hz, l_i=scene.l_i,
                      l_o=scene.l_o, target_id=scene.target_id)
    for t in scene.trajectories:
        assert_array_equal(back.trajectory(t.object_id).positions, t.positions)


def test_scene_csv_requires_horizons(tmp_path):
    scene = make_straight_scene()
    path = tmp_path / "s.csv"
    save_scene(scene, path)
    # csv carries no metadata, the caller must supply it
    with pytest.raises(SceneFormatError):
        load_scene(path)


def test_load_scene_missing_file():
    with pytest.raises(SceneFormatError, match="no such scene file"):
        load_scene("/nonexistent/scene.json")
