import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from streetdyn.lanegraph import (LaneGraphError, NoMatchError, Pose, find_section, lane_graph_from_dict,
                                 lane_graph_to_dict, load_lane_graph, make_section, point_on_section,
                                 related_section, within_road, within_road_mask)

MINIMAL = {
    "sections": [
        {"id": "a", "points": [[0, 0], [10, 0]], "driving_type": "straight", "lane_kind": "centerline"},
        {"id": "b", "points": [[0, 3.5], [10, 3.5]], "driving_type": "straight", "lane_kind": "centerline"},
    ],
    "edges": [["a", "b", "same_direction_adjacent"]],
}


def test_minimal_file(write_json):
    g = load_lane_graph(write_json(MINIMAL))
    assert len(g.sections) == 2 and len(g.edges) == 1


def test_dangling_edge_names_missing_id(write_json):
    doc = json.loads(json.dumps(MINIMAL))
    doc["edges"].append(["a", "s9", "connected"])
    with pytest.raises(LaneGraphError, match="s9"):
        load_lane_graph(write_json(doc))


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(LaneGraphError, match="malformed"):
        load_lane_graph(p)


@pytest.mark.parametrize("points", [[[0, 0]], [[0, 0], [0, 0]]])
def test_short_or_repeated_polyline(points):
    with pytest.raises(LaneGraphError):
        make_section("x", points, "straight", "centerline")


def test_unknown_relation():
    doc = json.loads(json.dumps(MINIMAL))
    doc["edges"][0][2] = "diagonal"
    with pytest.raises(LaneGraphError, match="diagonal"):
        lane_graph_from_dict(doc)


def test_intersection_counts_by_independent_walk(data_dir, intersection):
    raw = json.loads((data_dir / "maps" / "intersection.json").read_text())
    ids = {s["id"] for s in raw["sections"]}
    assert len(ids) == 12
    assert len(raw["edges"]) == 18
    assert all(e[0] in ids and e[1] in ids for e in raw["edges"])
    assert len(intersection.sections) == 12 and len(intersection.edges) == 18


def test_orientation_unit_norm(intersection):
    for sec in intersection.sections.values():
        assert sec.orientation.shape == sec.points.shape
        np.testing.assert_allclose(np.linalg.norm(sec.orientation, axis=1), 1.0, atol=1e-12)


def test_roundtrip(intersection):
    again = lane_graph_from_dict(lane_graph_to_dict(intersection))
    assert again.ids == intersection.ids and again.edges == intersection.edges


def test_find_section_sides(urban):
    ref = Pose(10.0, 0.0, 0.0)
    assert find_section(urban, ref, "front", "centerline", "straight") == "r0"
    assert find_section(urban, ref, "left", "centerline", "straight") == "r1"
    assert find_section(urban, ref, "right", "boundary", "straight") == "bs0"


def test_find_section_turn(intersection):
    ref = intersection.reference_pose()
    assert find_section(intersection, ref, "front", "centerline", "turn left") == "c_S_left"
    assert find_section(intersection, ref, "front", "centerline", "turn right") == "c_S_right"


def test_find_section_no_match(urban):
    with pytest.raises(NoMatchError):
        find_section(urban, Pose(10, 0, 0), "front", "centerline", "turn left")


def test_find_section_tie_breaks_by_id():
    doc = {"sections": [
        {"id": "z", "points": [[5, 2], [9, 2]]},
        {"id": "m", "points": [[5, -2], [9, -2]]},
    ], "half_width": 3.0}
    g = lane_graph_from_dict(doc)
    assert find_section(g, Pose(0, 0, 0), "front", "centerline", "straight") == "m"


def test_related_section(intersection, urban):
    assert related_section(intersection, "c_S_left", "adjacent straight") == "out_W"
    assert related_section(urban, "bs0", "opposite boundary") == "bn0"
    with pytest.raises(NoMatchError):
        related_section(urban, "r0", "adjacent left turn")


def test_point_strategies(urban):
    mid = point_on_section(urban, "bn0", "midpoint")
    assert (mid.x, mid.y) == pytest.approx((40.0, 8.75))
    end = point_on_section(urban, "r0", "endpoint")
    assert (end.x, end.y) == pytest.approx((150.0, 0.0))
    ahead = point_on_section(urban, "r0", "nearest_ahead", Pose(10.0, 0.0, 0.0))
    assert ahead.x > 10.0


def test_within_road(urban):
    assert within_road(urban, (50, 0.0))
    assert within_road(urban, (50, -2.2))
    assert not within_road(urban, (50, -2.3))
    assert not within_road(urban, (50, 30.0))


@given(st.floats(0, 150), st.floats(-10, 20))
def test_within_road_matches_lateral_band(urban, x, y):
    # straight lanes at y = 0, 3.5, 7 spanning x in [0, 150]
    expected = min(abs(y - c) for c in (0.0, 3.5, 7.0)) <= 2.25
    assert within_road_mask(urban, [[x, y]])[0] == expected
