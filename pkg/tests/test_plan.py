import pytest
from hypothesis import given, strategies as st

from streetdyn.plan import (AGENT_TYPES, ActorPlan, KeypointSpec, ScheduleError, SchemaError, derive_schedule,
                            interaction_groups, schedule_layers, validate_actor_output, validate_oracle_output)

OVERTAKE = {
    "agent_list": {"0": "car_a", "1": "car_b"},
    "init_states": [
        {"agent_id": "0", "agent_type": "vehicle", "movement": "overtake", "speed": 60},
        {"agent_id": "1", "agent_type": "vehicle", "movement": "straight", "speed": 30},
    ],
    "guide_texts": {"0": "car_a overtakes car_b", "1": "car_b drives straight"},
}

LEFT_TURN = {
    "depend": [-1, "None"], "speed_change": 0,
    "keypoints": [{"0": {"position": "front", "lane_type": "centerline", "direction": "turn left"}},
                  {"1": {"relationship": "adjacent straight"}}],
    "behavior": "None",
}


def test_oracle_overtake():
    r = validate_oracle_output(OVERTAKE)
    assert r.agent_list == {"0": "car_a", "1": "car_b"}
    assert r.state("0").movement == "overtake"
    assert r.state("0").speed == pytest.approx(60 / 3.6)


def test_oracle_missing_guide_texts():
    doc = {k: v for k, v in OVERTAKE.items() if k != "guide_texts"}
    with pytest.raises(SchemaError, match="guide_texts"):
        validate_oracle_output(doc)


def test_oracle_pedestrian_cannot_overtake():
    doc = {**OVERTAKE, "init_states": [dict(OVERTAKE["init_states"][0], agent_type="pedestrian"),
                                       OVERTAKE["init_states"][1]]}
    with pytest.raises(SchemaError, match="not allowed for pedestrian"):
        validate_oracle_output(doc)


def test_oracle_key_variants_and_all_errors_listed():
    doc = {"agent-list": OVERTAKE["agent_list"], "init-state": OVERTAKE["init_states"],
           "guide_texts": OVERTAKE["guide_texts"]}
    assert validate_oracle_output(doc).ids == ["0", "1"]
    bad = {**OVERTAKE, "init_states": [dict(s, speed=-1) for s in OVERTAKE["init_states"]]}
    with pytest.raises(SchemaError) as exc:
        validate_oracle_output(bad)
    assert len(exc.value.errors) == 2


def test_oracle_roundtrip():
    r = validate_oracle_output(OVERTAKE)
    assert validate_oracle_output(r.to_dict()) == r


def test_actor_left_turn():
    p = validate_actor_output(LEFT_TURN, "0", "vehicle", "turn left")
    assert [k.kind for k in p.keypoints] == [0, 1]
    assert p.keypoints[0].get("direction") == "turn left"
    assert p.keypoints[1].get("relation") == "adjacent_straight"
    assert validate_actor_output(p.to_dict(), "0", "vehicle", "turn left") == p


def test_actor_minus_one_requires_none():
    with pytest.raises(SchemaError, match="-1 requires"):
        validate_actor_output({**LEFT_TURN, "depend": [-1, "end"]})


def test_actor_taxi_pickup():
    doc = {"depend": [0, "end"], "speed_change": -1,
           "keypoints": [{"0": {"position": "left", "lane_type": "centerline", "direction": "straight"}},
                         {"2": {"info_type": "point"}}]}
    p = validate_actor_output(doc, "1", "vehicle", "pull over")
    assert p.depend_id == "0" and p.depend_type == "end"
    assert p.keypoints[-1] == KeypointSpec(2, (("info_type", "point"),))
    assert p.behavior == "None"


def test_actor_first_keypoint_rule():
    doc = {"depend": [0, "end"], "speed_change": 0, "keypoints": [{"2": {"info_type": "point"}}]}
    with pytest.raises(SchemaError, match="first keypoint"):
        validate_actor_output(doc, "1", "vehicle", "straight")
    ok = {"depend": [0, "trajectory"], "speed_change": 0, "keypoints": [{"2": {"info_type": "trajectory"}}],
          "behavior": "pushing."}
    p = validate_actor_output(ok, "1", "pedestrian", "straight")
    assert p.behavior == "pushing"


def test_actor_vehicle_behavior_must_be_none():
    with pytest.raises(SchemaError, match="behavior"):
        validate_actor_output({**LEFT_TURN, "behavior": "waving"}, "0", "vehicle", "turn left")


def test_actor_pedestrian_needs_behavior():
    doc = {k: v for k, v in LEFT_TURN.items() if k != "behavior"}
    with pytest.raises(SchemaError, match="behavior"):
        validate_actor_output(doc, "0", "pedestrian", "straight")


def _plan(aid, dep=None, kind="end"):
    return ActorPlan(aid, dep, kind if dep is not None else "None", 0, ())


def test_schedule_examples():
    assert derive_schedule({"A": _plan("A", "B"), "B": _plan("B")}) == ["B", "A"]
    assert derive_schedule({k: _plan(k) for k in "201"}) == ["0", "1", "2"]
    with pytest.raises(ScheduleError) as exc:
        derive_schedule({"A": _plan("A", "B"), "B": _plan("B", "A")})
    assert exc.value.cycle == ["A", "B"]


def test_numeric_ids_sort_numerically():
    actors = {str(i): _plan(str(i)) for i in (10, 2, 1)}
    assert derive_schedule(actors) == ["1", "2", "10"]


def test_layers_and_groups():
    actors = {"0": _plan("0", "1", "trajectory"), "1": _plan("1"), "2": _plan("2")}
    order = derive_schedule(actors)
    assert order == ["1", "0", "2"]
    assert schedule_layers(actors, order) == [["1", "2"], ["0"]]
    assert interaction_groups(actors) == [["0", "1"], ["2"]]


@given(st.lists(st.integers(-1, 7), min_size=1, max_size=8))
def test_schedule_respects_random_forests(parents):
    # each agent i may depend on an earlier agent only, so the graph is acyclic
    actors = {}
    for i, p in enumerate(parents):
        dep = str(p) if 0 <= p < i else None
        actors[str(i)] = _plan(str(i), dep)
    order = derive_schedule(actors)
    pos = {a: n for n, a in enumerate(order)}
    assert sorted(order, key=int) == [str(i) for i in range(len(parents))]
    for a, plan in actors.items():
        if plan.depend_id is not None:
            assert pos[plan.depend_id] < pos[a]


def test_agent_types_vocabulary():
    assert AGENT_TYPES == ("pedestrian", "vehicle")
