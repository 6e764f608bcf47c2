import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import crossing, head_on, line
from streetdyn.lanegraph import Pose
from streetdyn.plan import ActorPlan, KeypointSpec
from streetdyn.planner import (DegenerateKeypointsError, Footprint, InteractionContext, MissingDependencyError,
                               PlannedTrajectory, PlanningError, detect_collisions, exchange_interaction_info,
                               handle_collisions, interpolate_keypoints, plan_trajectory, resolve_keypoints,
                               slowdown_warp, time_parameterize)

CAR = Footprint.box(2.7, 1.8)


def kp0(pos="front", kind="centerline", direction="straight"):
    return KeypointSpec(0, (("position_rel", pos), ("lane_kind", kind), ("direction", direction)))


def kp1(rel):
    return KeypointSpec(1, (("relation", rel),))


def kp2(info):
    return KeypointSpec(2, (("info_type", info),))


def test_straight_segment():
    path = interpolate_keypoints([(0, 0), (10, 0)])
    assert path.length == pytest.approx(10.0)
    np.testing.assert_allclose(path.point_at(5.0)[0], (5.0, 0.0), atol=1e-9)


def test_passes_through_middle_knot():
    path = interpolate_keypoints([(0, 0), (5, 5), (10, 0)])
    s = path.knot_arclengths
    np.testing.assert_allclose(path.point_at(s[1])[0], (5.0, 5.0), atol=1e-9)
    # direct cubic evaluation of segment 0 at u=1 is the knot itself
    c = path.controls[0]
    np.testing.assert_allclose(c[3], (5.0, 5.0), atol=1e-12)


def test_degenerate_keypoints():
    with pytest.raises(DegenerateKeypointsError):
        interpolate_keypoints([(0, 0), (0, 0), (1, 1)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=6))
def test_endpoints(points):
    pts = np.array(points)
    if np.min(np.linalg.norm(np.diff(pts, axis=0), axis=1)) < 0.5:
        return
    path = interpolate_keypoints(pts)
    np.testing.assert_allclose(path.point_at(0.0)[0], pts[0], atol=1e-9)
    np.testing.assert_allclose(path.point_at(path.length)[0], pts[-1], atol=1e-6)


def test_polyline_spacing():
    path = interpolate_keypoints([(0, 0), (5, 5), (10, 0), (20, 3)])
    poly = path.polyline(0.1)
    assert np.max(np.linalg.norm(np.diff(poly, axis=0), axis=1)) <= 0.1 + 1e-9


def test_time_parameterize_examples():
    path = interpolate_keypoints([(0, 0), (100, 0)])
    tr = time_parameterize(path, 10.0, 0, 0.1)
    assert len(tr) == 101 and tr.t[-1] == pytest.approx(10.0)
    fast = time_parameterize(path, 10.0, 1, 0.1)
    assert fast.duration == pytest.approx(100 / 13, abs=0.1)
    static = time_parameterize(path, 0.0, 0, 0.1, static_duration=20.0)
    assert len(static) == 201 and np.all(static.p == static.p[0]) and np.all(static.heading == 0.0)


def test_trajectory_arc_length_matches_path():
    path = interpolate_keypoints([(0, 0), (20, 10), (40, 0)])
    tr = time_parameterize(path, 7.0)
    assert tr.arc_length == pytest.approx(path.length, rel=5e-3)
    # samples lie on the path
    dense = path.polyline(0.05)
    d = np.min(np.linalg.norm(tr.p[:, None, :] - dense[None], axis=2), axis=1)
    assert d.max() < 0.05


def test_heading_follows_travel():
    path = interpolate_keypoints([(0, 0), (20, 10), (40, 0)])
    tr = time_parameterize(path, 7.0)
    d = np.diff(tr.p, axis=0)
    fd = np.arctan2(d[:, 1], d[:, 0])
    err = np.angle(np.exp(1j * (fd - tr.heading[:-1])))
    assert np.abs(err).max() < 0.05


def test_csv_roundtrip():
    tr = line("x", (0, 0), 0.3, 4.0, 11)
    again = PlannedTrajectory.from_csv(tr.to_csv(), "x")
    np.testing.assert_allclose(again.p, tr.p, atol=1e-6)
    assert again.to_csv() == tr.to_csv()


def test_resolve_left_turn(intersection):
    plan = ActorPlan("0", None, "None", 0, (kp0(direction="turn left"), kp1("adjacent_straight")))
    kps = resolve_keypoints(plan, intersection, None)
    assert len(kps) == 2
    assert kps[0].section == "c_S_left" and kps[0].position == pytest.approx((1.75, -7.0))
    assert kps[1].section == "out_W"
    assert kps[1].position == pytest.approx((-33.5, 1.75))


def test_resolve_static_pedestrian(urban):
    plan = ActorPlan("0", None, "None", 0, (kp0("right", "boundary"),), "waiting")
    kps = resolve_keypoints(plan, urban, None, static=True)
    assert len(kps) == 2
    assert math.dist(kps[0].position, kps[1].position) == pytest.approx(1.0)
    assert kps[1].position[1] == pytest.approx(kps[0].position[1])


def test_resolve_type2_point(urban):
    plan = ActorPlan("1", "0", "end", 0, (kp0(), kp2("point")))
    ctx = InteractionContext("1", "0", "end", point=np.array([50.0, 3.0]))
    kps = resolve_keypoints(plan, urban, ctx)
    assert kps[-1].position == pytest.approx((50.0, 3.0))


def test_exchange_info():
    b = line("B", (40, 3), 0.0, 1.0, 101)
    plans = {"A": ActorPlan("A", "B", "end", 0, ()), "B": ActorPlan("B", None, "None", 0, ()),
             "C": ActorPlan("C", "B", "trajectory", 0, ()), "D": ActorPlan("D", "E", "start", 0, ())}
    ctx = exchange_interaction_info(plans, {"B": b}, "A")
    np.testing.assert_allclose(ctx.point, (50.0, 3.0))
    ctx = exchange_interaction_info(plans, {"B": b}, "C")
    assert len(ctx.trajectory) == len(b)
    with pytest.raises(MissingDependencyError):
        exchange_interaction_info(plans, {"B": b}, "D")


def test_plan_trajectory_left_turn_stays_on_road(intersection):
    from streetdyn.lanegraph import within_road_mask

    plan = ActorPlan("0", None, "None", 0, (kp0(direction="turn left"), kp1("adjacent_straight")))
    tr = plan_trajectory(plan, intersection, None, 30 / 3.6, False)
    assert within_road_mask(intersection, tr.p).all()


def test_collision_detection_examples():
    fp = {"a": CAR, "b": CAR}
    assert detect_collisions([line("a", (0, 0), 0, 5, 50), line("b", (0, 3.5), 0, 5, 50)], fp) == []
    (ev,) = detect_collisions(list(crossing()), fp)
    # closed form: both start 20 m out at 5 m/s, so the centres coincide at t = 4 s
    assert ev.t == pytest.approx(4.0) and ev.separation == pytest.approx(0.0, abs=1e-9)
    assert detect_collisions(list(crossing(delay=5.0)), fp) == []


def test_pedestrian_disc():
    fp = {"p": Footprint.pedestrian(), "c": CAR}
    ped = line("p", (0, 1.2), 0, 0.0, 10)
    car = line("c", (0, 0), 0, 0.0, 10)
    assert len(detect_collisions([ped, car], fp)) == 1
    ped_far = line("p", (0, 1.31), 0, 0.0, 10)
    assert detect_collisions([ped_far, car], fp) == []


def test_mismatched_dt():
    with pytest.raises(PlanningError, match="dt"):
        detect_collisions([line("a", (0, 0), 0, 1, 5), line("b", (0, 9), 0, 1, 5, dt=0.2)], {"a": CAR, "b": CAR})


def test_handle_crossing_and_head_on():
    fp = {"a": CAR, "b": CAR}
    r = handle_collisions(list(crossing()), fp, ["a", "b"])
    assert r.residual == []
    assert detect_collisions(list(r.trajectories.values()), fp) == []
    np.testing.assert_array_equal(r.trajectories["a"].p, crossing()[0].p)
    r = handle_collisions(list(head_on()), fp, ["a", "b"])
    assert r.residual and r.passes == 5


def test_handle_noop_is_bitwise():
    trs = [line("a", (0, 0), 0, 5, 50), line("b", (0, 3.5), 0, 5, 50)]
    r = handle_collisions(trs, {"a": CAR, "b": CAR})
    assert r.passes == 0 and r.trajectories["a"] is trs[0] and r.trajectories["b"] is trs[1]


def test_slowdown_warp_keeps_path():
    tr = line("a", (0, 0), 0, 5, 101)
    w = slowdown_warp(tr, 5.0)
    # slowing down delays arrival, so the warped plan is longer
    assert len(w) > len(tr)
    np.testing.assert_allclose(w.p[-1], tr.p[-1], atol=1e-9)
    assert np.all(np.diff(w.p[:, 0]) >= -1e-12)
    assert w.p[:, 0].max() <= tr.p[-1, 0] + 1e-9
    assert w.p[50, 0] < tr.p[50, 0]
