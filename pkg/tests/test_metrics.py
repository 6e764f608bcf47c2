import numpy as np
import pytest

from builders import line
from streetdyn.metrics import (MisalignedTraceError, collision_rate, evaluate_case, format_table, noise_robustness,
                               overlay_svg, perturb_plan, position_velocity_error, rows_to_csv, speed_table,
                               evaluate_suite, within_road_rate)
from streetdyn.planner import Footprint
from streetdyn.suite import desk_suite, make_plan
from streetdyn.vehicle import DynamicsTrace, PurePursuitController

# first verified pursuit run on the 10 m/s S-curve, frozen as a regression value
PP_S_CURVE_10 = (0.015897, 0.0)


def as_trace(plan, offset=(0.0, 0.0)):
    return DynamicsTrace.from_positions(plan.agent_id, plan.dt, plan.t, plan.p + np.asarray(offset),
                                        plan.heading, plan.v_target)


def test_identical_trace_zero_error():
    plan = line("a", (0, 0), 0.2, 3.0, 30)
    assert position_velocity_error(as_trace(plan), plan) == (0.0, 0.0)


def test_lateral_offset():
    plan = line("a", (0, 0), 0.0, 3.0, 30)
    e_pos, e_vel = position_velocity_error(as_trace(plan, (0.0, 1.0)), plan)
    assert e_pos == pytest.approx(1.0) and e_vel == 0.0


def test_misaligned():
    plan = line("a", (0, 0), 0.0, 3.0, 30)
    long = line("a", (0, 0), 0.0, 3.0, 31)
    with pytest.raises(MisalignedTraceError):
        position_velocity_error(as_trace(long), plan)
    shifted = as_trace(plan)
    shifted.t = shifted.t + 0.05
    with pytest.raises(MisalignedTraceError):
        position_velocity_error(shifted, plan)


def test_pursuit_s_curve_golden():
    plan = make_plan("s_curve", 10.0)
    _, e_pos, e_vel = evaluate_case(plan, PurePursuitController())
    assert (e_pos, e_vel) == pytest.approx(PP_S_CURVE_10, abs=1e-6)


def _parked_cars(n, hits):
    traces, fps = [], {}
    for i in range(n):
        y = 0.0 if i < hits else 10.0 * (i + 1)
        x = 1.0 * i if i < hits else 0.0
        tr = as_trace(line(f"v{i}", (x, y), 0.0, 0.0, 5))
        traces.append(tr)
        fps[tr.agent_id] = Footprint.box(4.5, 1.8)
    return traces, fps


def test_collision_rate_counts_vehicles():
    traces, fps = _parked_cars(10, 2)
    assert collision_rate(traces, fps) == pytest.approx(0.2)
    assert collision_rate(traces[::-1], fps) == pytest.approx(0.2)
    traces, fps = _parked_cars(10, 0)
    assert collision_rate(traces, fps) == 0.0
    assert collision_rate(traces[:2], fps, exempt=[("v0", "v1")]) == 0.0


def test_pedestrian_only_contact():
    a = as_trace(line("p0", (0, 0), 0.0, 0.0, 5))
    b = as_trace(line("p1", (0.2, 0), 0.0, 0.0, 5))
    assert collision_rate([a, b], {"p0": Footprint.pedestrian(), "p1": Footprint.pedestrian()}) == 0.0


def test_within_road(urban):
    sec = next(urban.section(s) for s in urban.ids if urban.section(s).driving_type != "none")
    pts = sec.points
    on = DynamicsTrace.from_positions("v", 0.1, 0.1 * np.arange(len(pts)), pts, np.zeros(len(pts)), np.zeros(len(pts)))
    assert within_road_rate(on, urban) == 1.0
    far = pts + 1e4
    off = DynamicsTrace.from_positions("v", 0.1, on.t, far, on.heading, on.v)
    assert within_road_rate(off, urban) == 0.0
    half = np.vstack([pts[: len(pts) // 2], far[: len(pts) - len(pts) // 2]])
    n_on = len(pts) // 2
    mixed = DynamicsTrace.from_positions("v", 0.1, on.t, half, on.heading, on.v)
    assert within_road_rate(mixed, urban) == pytest.approx(n_on / len(pts))


def test_perturb_plan():
    plan = make_plan("straight", 5.0)
    assert np.array_equal(perturb_plan(plan, 0.0, np.random.default_rng(0)).p, plan.p)
    noisy = perturb_plan(plan, 0.04, np.random.default_rng(0))
    assert np.std(noisy.p - plan.p) == pytest.approx(0.2, rel=0.15)
    with pytest.raises(ValueError):
        perturb_plan(plan, -1.0, np.random.default_rng(0))


def test_noise_robustness_clean_row():
    plan = make_plan("circle", 10.0)
    rows = noise_robustness(plan, PurePursuitController(), (0.0, 0.01), range(3))
    _, e_pos, e_vel = evaluate_case(plan, PurePursuitController())
    assert rows[0] == (0.0, e_pos, e_vel)
    assert len(rows) == 2


def test_speed_table_and_pp_ordering():
    table = speed_table(evaluate_suite(desk_suite(), PurePursuitController()))
    assert [r[0] for r in table] == [0.0, 5.0, 10.0, 20.0]
    e = [r[1] for r in table]
    assert all(a <= b for a, b in zip(e, e[1:]))


def test_report_formats():
    rows = [("a", 1.0, 0.5)]
    assert rows_to_csv(("id", "x", "y"), rows) == "id,x,y\na,1.000000,0.500000\n"
    text = format_table(("id", "x", "y"), rows)
    assert text.splitlines()[0].split() == ["id", "x", "y"]
    plan = make_plan("straight", 5.0, horizon=10)
    svg = overlay_svg(plan, as_trace(plan))
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
