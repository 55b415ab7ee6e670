import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from trajattack import (
    PerturbationConstraints,
    PhysicalBounds,
    Scene,
    Trajectory,
    check_feasible,
    estimate_bounds,
    kinematics,
    load_bounds,
    preset_bounds,
    project,
    save_bounds,
)
from trajattack.constraints import feasible_positions, project_positions

from conftest import make_straight_scene, slack_bounds, straight_positions


def test_physical_bounds_must_be_positive():
    with pytest.raises(ValueError, match="max_lat_accel"):
        PhysicalBounds(1.0, 1.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError, match="max_speed"):
        PhysicalBounds(-1.0, 1.0, 1.0, 1.0, 1.0)


def test_preset_bounds_match_reference_tables():
    apollo = preset_bounds("apolloscape_like")
    assert apollo.max_speed == 21.078
    assert apollo.max_long_accel == 9.914
    assert apollo.max_lat_accel == 1.912
    assert apollo.max_long_jerk == 16.836
    assert apollo.max_lat_jerk == 3.154
    ngsim = preset_bounds("ngsim_like")
    assert (ngsim.max_speed, ngsim.max_long_accel, ngsim.max_lat_accel,
            ngsim.max_long_jerk, ngsim.max_lat_jerk) == (20.83, 1.455, 0.62, 1.955, 0.925)
    nus = preset_bounds("nuscenes_like")
    assert (nus.max_speed, nus.max_long_accel, nus.max_lat_accel,
            nus.max_long_jerk, nus.max_lat_jerk) == (17.198, 2.55, 0.936, 3.914, 1.07)
    with pytest.raises(ValueError, match="unknown bounds preset"):
        preset_bounds("waymo_like")


def test_bounds_file_round_trip(tmp_path):
    b = PhysicalBounds(1.5, 2.5, 3.5, 4.5, 5.5)
    path = tmp_path / "b.json"
    save_bounds(b, path)
    assert load_bounds(path) == b
    # dict source too
    assert load_bounds(json.loads(path.read_text())) == b
    with pytest.raises(ValueError, match="missing"):
        load_bounds({"max_speed": 1.0})


def test_constraints_validation():
    b = slack_bounds()
    with pytest.raises(ValueError, match="max_deviation"):
        PerturbationConstraints(bounds=b, max_deviation=0.0)
    with pytest.raises(ValueError, match="context_frames"):
        PerturbationConstraints(bounds=b, context_frames=-1)
    cons = PerturbationConstraints(bounds=b, max_deviation=2.0)
    assert cons.with_deviation(0.5).max_deviation == 0.5
    assert cons.with_deviation(0.5).bounds == b


def _constant_speed_scene(speed, n=8, f=1.0):
    pos = straight_positions(n, speed=speed, f=f)
    return Scene(f, 2, 2, "t", (Trajectory("t", "vehicle", pos),))


def test_estimate_bounds_zero_variance():
    # identical constant-speed trajectories: mu = 5, sigma = 0
    bounds = estimate_bounds([_constant_speed_scene(5.0), _constant_speed_scene(5.0)])
    assert bounds.max_speed == 5.0
    # the degenerate accel/jerk pools bottom out at the tiny floor
    assert bounds.max_long_accel <= 1e-9


def test_estimate_bounds_hand_sigma():
    # speeds all 4 and all 6 pooled: mu = 5, sigma = 1 -> max(|5+3|, |5-3|) = 8
    bounds = estimate_bounds([_constant_speed_scene(4.0), _constant_speed_scene(6.0)])
    assert bounds.max_speed == 8.0


def test_estimate_bounds_ignores_pedestrians_and_rejects_empty():
    scene = _constant_speed_scene(4.0)
    ped = Trajectory("p", "pedestrian", straight_positions(8, speed=100.0, f=1.0))
    with_ped = Scene(1.0, 2, 2, "t", (scene.target, ped))
    assert estimate_bounds([with_ped]).max_speed == 4.0
    with pytest.raises(ValueError):
        estimate_bounds([])


def test_zero_delta_feasible_everywhere(small_corpus, apollo_cons):
    for scene in small_corpus:
        verdict = check_feasible(scene, np.zeros((scene.l_i, 2)), apollo_cons)
        assert bool(verdict) and verdict.violations == ()


def test_deviation_violation_names_frame():
    scene = make_straight_scene()
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    delta = np.zeros((6, 2))
    delta[3] = [1.5, 0.0]
    verdict = check_feasible(scene, delta, cons)
    assert not verdict
    dev = [v for v in verdict.violations if v.prop == "deviation"]
    assert len(dev) == 1 and dev[0].frame == 3 and dev[0].bound == 1.0
    assert "deviation[3]" in str(dev[0])


def test_feasibility_matches_brute_force_kinematics(apollo_bounds):
    # alternating lateral wiggle on a 2 Hz straight scene: the verdict must
    # agree with recomputing every differenced bound by hand
    scene = make_straight_scene(f=2.0, speed=10.0)
    cons = PerturbationConstraints(bounds=apollo_bounds, max_deviation=1.0,
                                   context_frames=3)
    rng = np.random.default_rng(0)
    for trial in range(40):
        amp = rng.uniform(0.05, 0.9)
        delta = np.zeros((6, 2))
        delta[:, 1] = amp * (-1.0) ** np.arange(6)
        if trial % 2:
            delta += rng.normal(0.0, 0.1, size=delta.shape)

        # independent recomputation on the perturbed prefix plus context
        pos = scene.target.positions[: 6 + 3].copy()
        pos[:6] += delta
        k = kinematics(pos, 2.0)
        b = apollo_bounds
        expect = (
            np.all(np.linalg.norm(delta, axis=1) <= 1.0)
            and np.all(k.speed <= b.max_speed)
            and np.all(np.abs(k.long_accel) <= b.max_long_accel)
            and np.all(np.abs(k.lat_accel) <= b.max_lat_accel)
            and np.all(np.abs(k.long_jerk) <= b.max_long_jerk)
            and np.all(np.abs(k.lat_jerk) <= b.max_lat_jerk)
        )
        assert bool(check_feasible(scene, delta, cons)) == bool(expect)


def test_context_frames_catch_boundary_kinks():
    # a pure shift of the prefix is smooth inside the prefix; only the
    # junction into the unperturbed context frames reveals it
    scene = make_straight_scene(f=2.0, speed=10.0)
    tight = PhysicalBounds(max_speed=11.0, max_long_accel=0.5, max_lat_accel=0.5,
                           max_long_jerk=1.0, max_lat_jerk=1.0)
    delta = np.tile([0.0, 0.9], (6, 1))  # constant lateral shift
    with_context = PerturbationConstraints(bounds=tight, max_deviation=1.0, context_frames=3)
    without = PerturbationConstraints(bounds=tight, max_deviation=1.0, context_frames=0)
    assert bool(check_feasible(scene, delta, without))
    assert not check_feasible(scene, delta, with_context)


def test_project_feasible_delta_unchanged():
    scene = make_straight_scene()
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    delta = np.full((6, 2), 0.1)
    out, theta = project(scene, delta, cons)
    assert theta == 1.0
    assert_array_equal(out, delta)
    # returned array is a copy, not the input
    assert out is not delta


def test_project_zero_delta():
    scene = make_straight_scene()
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    out, theta = project(scene, np.zeros((6, 2)), cons)
    assert theta == 1.0
    assert_array_equal(out, np.zeros((6, 2)))


def test_project_deviation_only_closed_form():
    # only the deviation cap binds: theta = min(1, cap / max per-frame norm)
    scene = make_straight_scene()
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        delta = rng.uniform(-3.0, 3.0, size=(6, 2))
        expected = min(1.0, 1.0 / np.max(np.linalg.norm(delta, axis=1)))
        out, theta = project(scene, delta, cons)
        assert abs(theta - expected) <= 1e-3
        assert_allclose(out, theta * delta)


def test_project_single_frame_two_meters():
    scene = make_straight_scene()
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    delta = np.zeros((6, 2))
    delta[2] = [0.0, 2.0]
    _, theta = project(scene, delta, cons)
    assert abs(theta - 0.5) <= 1e-3


def test_project_against_dense_theta_oracle(small_corpus, apollo_cons):
    # the projection must find the top of the feasible range: compare to a
    # 2000-point scan of theta
    rng = np.random.default_rng(2)
    for scene in small_corpus[:6]:
        n = scene.l_i
        delta = rng.normal(0.0, 1.2, size=(n, 2))
        out, theta = project(scene, delta, apollo_cons)
        assert bool(check_feasible(scene, out, apollo_cons))
        dense = np.linspace(0.0, 1.0, 2000)
        feas = [
            bool(check_feasible(scene, th * delta, apollo_cons)) for th in dense
        ]
        best = dense[max(np.flatnonzero(feas))]
        assert theta <= best + 1e-3
        assert theta >= best - 2e-3 or theta == 1.0


def test_project_maximality_margin(small_corpus, apollo_cons):
    # theta + 2e-3 must overshoot into infeasibility unless theta hit 1
    rng = np.random.default_rng(3)
    failures = 0
    for scene in small_corpus:
        for _ in range(10):
            delta = rng.normal(0.0, 1.0, size=(scene.l_i, 2))
            _, theta = project(scene, delta, apollo_cons)
            if theta == 1.0:
                continue
            pushed = feasible_positions(
                scene.target.positions, (theta + 2e-3) * delta,
                scene.frequency_hz, apollo_cons,
            )
            failures += bool(pushed)
    assert failures == 0


def test_projection_soundness_random(small_corpus, apollo_cons):
    rng = np.random.default_rng(4)
    for scene in small_corpus:
        for scale in (0.1, 1.0, 5.0):
            delta = rng.normal(0.0, scale, size=(scene.l_i, 2))
            out, theta = project(scene, delta, apollo_cons)
            assert 0.0 <= theta <= 1.0
            assert bool(check_feasible(scene, out, apollo_cons))


def test_project_positions_validates_shape():
    pos = straight_positions(12)
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    with pytest.raises(ValueError, match="shape"):
        project_positions(pos, np.zeros((6, 3)), 2.0, cons)
    with pytest.raises(ValueError, match="too short"):
        project_positions(pos[:3], np.zeros((3, 2)), 2.0,
                          PerturbationConstraints(bounds=slack_bounds(), context_frames=0))
