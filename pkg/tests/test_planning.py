import numpy as np
import pytest
from numpy.testing import assert_allclose

from trajattack import (
    AttackConfig,
    AvState,
    Crossing,
    assess_prediction,
    av_behind_target,
    classify_severity,
    find_crossing,
    impact_report,
    make_predictor,
    required_deceleration,
    run_attack,
    severity_rank,
)
from trajattack.attacks import PgdParams
from trajattack.constraints import PerturbationConstraints

from conftest import make_straight_scene, slack_bounds


def east_av(velocity=10.0, margin=2.0):
    return AvState(position=np.zeros(2), heading=0.0, velocity=velocity,
                   safety_margin=margin)


# -- braking kinematics -------------------------------------------------------


def test_required_deceleration_hand_cases():
    av = east_av(velocity=10.0)
    # v^2 / (2 (d - margin)): 100 / (2 * 25)
    assert required_deceleration(av, 27.0) == 2.0
    # 144 / (2 * 6)
    assert required_deceleration(east_av(velocity=12.0), 8.0) == 12.0
    # inside the safety margin there is no stopping distance left
    assert required_deceleration(av, 2.0) == float("inf")
    assert required_deceleration(av, 1.0) == float("inf")


def test_required_deceleration_decreases_with_distance():
    av = east_av()
    vals = [required_deceleration(av, d) for d in (3.0, 5.0, 10.0, 100.0)]
    assert vals == sorted(vals, reverse=True)
    assert vals[-1] > 0.0


def test_severity_classes_and_boundaries():
    assert classify_severity(None) == "none"
    assert classify_severity(0.0) == "comfortable"
    assert classify_severity(4.0) == "comfortable"
    assert classify_severity(np.nextafter(4.0, 5.0)) == "hard_brake"
    assert classify_severity(10.0) == "hard_brake"
    assert classify_severity(np.nextafter(10.0, 11.0)) == "emergency"
    assert classify_severity(float("inf")) == "emergency"
    with pytest.raises(ValueError):
        classify_severity(-0.1)


def test_severity_rank_orders_the_scale():
    ranks = [severity_rank(s) for s in ("none", "comfortable", "hard_brake", "emergency")]
    assert ranks == [0, 1, 2, 3]


def test_av_state_validation():
    with pytest.raises(ValueError, match="2-vector"):
        AvState(position=np.zeros(3), heading=0.0, velocity=1.0)
    with pytest.raises(ValueError, match="velocity"):
        AvState(position=np.zeros(2), heading=0.0, velocity=-1.0)
    with pytest.raises(ValueError, match="lane_width"):
        AvState(position=np.zeros(2), heading=0.0, velocity=1.0, lane_width=0.0)
    with pytest.raises(ValueError, match="safety_margin"):
        AvState(position=np.zeros(2), heading=0.0, velocity=1.0, safety_margin=-1.0)


# -- corridor crossing --------------------------------------------------------


def test_crossing_contained_first_point():
    c = find_crossing(np.array([[5.0, 0.0], [6.0, 0.0]]), east_av(), 1.0)
    assert bool(c)
    assert c.frame == 1
    assert c.distance == 5.0
    assert_allclose(c.point, [5.0, 0.0])


def test_crossing_interpolates_the_lateral_entry():
    # drops from one lane over into the corridor midway through segment 1
    pred = np.array([[5.0, 3.7], [5.0, 0.0]])
    c = find_crossing(pred, east_av(), 1.0)
    assert c.frame == 2
    assert_allclose(c.point, [5.0, 1.85])
    assert_allclose(c.distance, 5.0)


def test_corridor_length_is_av_travel_during_horizon():
    av = east_av()  # 10 m/s, two predicted frames at 1 Hz: corridor ends at 20
    assert not find_crossing(np.array([[25.0, 0.0], [21.0, 0.0]]), av, 1.0)
    c = find_crossing(np.array([[25.0, 0.0], [19.0, 0.0]]), av, 1.0)
    assert c.frame == 2
    assert_allclose(c.distance, 20.0)
    assert_allclose(c.point, [20.0, 0.0])


def test_points_behind_the_av_do_not_cross():
    assert not find_crossing(np.array([[-5.0, 0.0]]), east_av(), 1.0)
    empty = Crossing()
    assert not empty and empty.frame is None and empty.distance is None


def test_crossing_from_behind_enters_at_zero_distance():
    c = find_crossing(np.array([[-5.0, 0.0], [5.0, 0.0]]), east_av(), 1.0)
    assert c.frame == 2
    assert c.distance == 0.0
    # stopping distance zero forces an emergency verdict
    assert required_deceleration(east_av(), c.distance) == float("inf")


def test_crossing_is_rotation_equivariant():
    pred = np.array([[5.0, 3.7], [5.0, 0.0]])
    base = find_crossing(pred, east_av(), 1.0)
    phi = 0.7
    rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
    shift = np.array([3.0, -2.0])
    av = AvState(position=shift, heading=phi, velocity=10.0)
    c = find_crossing(pred @ rot.T + shift, av, 1.0)
    assert c.frame == base.frame
    assert_allclose(c.distance, base.distance, atol=1e-9)
    assert_allclose(c.point, rot @ base.point + shift, atol=1e-9)


def test_find_crossing_validation():
    with pytest.raises(ValueError, match="shape"):
        find_crossing(np.zeros((2, 3)), east_av(), 1.0)
    with pytest.raises(ValueError, match="frequency"):
        find_crossing(np.zeros((2, 2)), east_av(), 0.0)


# -- verdicts -----------------------------------------------------------------


def test_assess_prediction_no_crossing():
    pred = np.array([[500.0, 0.0], [510.0, 0.0]])
    v = assess_prediction(pred, east_av(), 1.0)
    assert not v.crossing
    assert v.required_decel is None
    assert v.severity == "none"
    assert not v.lane_deviation_flag
    d = v.as_dict()
    assert d["crossing_frame"] is None and d["severity"] == "none"


def test_assess_prediction_crossing_and_deviation_flag():
    pred = np.array([[12.0, 0.0], [13.0, 0.0]])
    av = east_av()
    v = assess_prediction(pred, av, 1.0, deviation=1.86)
    # 100 / (2 * 10)
    assert v.required_decel == 5.0
    assert v.severity == "hard_brake"
    assert v.lane_deviation_flag
    # half a lane (1.85 m) exactly does not trip the flag
    assert not assess_prediction(pred, av, 1.0, deviation=1.85).lane_deviation_flag


def test_av_behind_target_follows_the_lane():
    east = make_straight_scene(speed=10.0)
    av = av_behind_target(east, gap=20.0, velocity=8.0)
    last = east.target.positions[east.l_i - 1]
    assert_allclose(av.position, last - [20.0, 0.0])
    assert_allclose(av.heading, 0.0, atol=1e-12)
    assert av.velocity == 8.0

    north = make_straight_scene(direction=(0.0, 1.0), scene_id="north")
    av = av_behind_target(north, gap=5.0, velocity=8.0)
    assert_allclose(av.heading, np.pi / 2.0, atol=1e-12)
    assert_allclose(av.position, north.target.positions[north.l_i - 1] - [0.0, 5.0])


def test_fake_braking_attack_escalates_the_verdict():
    # follower 26 m behind the target at matched speed: the true prediction
    # ends just beyond the corridor, a rearward attack pulls it inside
    scene = make_straight_scene(speed=10.0, f=2.0)
    av = av_behind_target(scene, gap=26.0, velocity=10.0)
    model = make_predictor("constant_velocity", scene.l_i, scene.l_o)
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=1.0)
    cfg = AttackConfig(objective="rear", constraints=cons, optimizer="pgd",
                       pgd=PgdParams(max_iter=150), seed=5)
    result = run_attack(scene, model, cfg)

    cmp = impact_report(result, scene, av)
    assert cmp.before.severity == "none"
    assert cmp.before.required_decel is None
    assert cmp.after.severity == "comfortable"
    assert cmp.escalated
    # rearward pull of the first predicted point is capped at 3 * deviation
    assert 28.0 - 1e-6 <= cmp.after.crossing.distance < 30.0
    assert_allclose(cmp.after.required_decel,
                    required_deceleration(av, cmp.after.crossing.distance))
    # the mean rearward error is well past half a lane, the true one is not
    assert cmp.after.lane_deviation_flag
    assert not cmp.before.lane_deviation_flag
    d = cmp.as_dict()
    assert d["before"]["severity"] == "none" and d["after"]["severity"] == "comfortable"


def test_unescalated_comparison():
    scene = make_straight_scene(speed=10.0, f=2.0)
    av = av_behind_target(scene, gap=500.0, velocity=1.0)
    model = make_predictor("constant_velocity", scene.l_i, scene.l_o)
    cons = PerturbationConstraints(bounds=slack_bounds(), max_deviation=0.1)
    cfg = AttackConfig(objective="ade", constraints=cons, optimizer="pgd",
                       pgd=PgdParams(max_iter=3), seed=0)
    cmp = impact_report(run_attack(scene, model, cfg), scene, av)
    assert cmp.before.severity == cmp.after.severity == "none"
    assert not cmp.escalated
