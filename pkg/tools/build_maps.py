"""Regenerate the bundled lane-graph fixtures under src/streetdyn/data/maps."""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "streetdyn" / "data" / "maps"


def line(x0, y0, x1, y1, step=1.0):
    n = max(1, int(round(math.hypot(x1 - x0, y1 - y0) / step)))
    return [[round(x0 + (x1 - x0) * k / n, 6), round(y0 + (y1 - y0) * k / n, 6)] for k in range(n + 1)]


def arc(cx, cy, r, a0, a1, step=0.5):
    n = max(2, int(math.ceil(abs(a1 - a0) * r / step)))
    return [[round(cx + r * math.cos(a0 + (a1 - a0) * k / n), 6),
             round(cy + r * math.sin(a0 + (a1 - a0) * k / n), 6)] for k in range(n + 1)]


def sec(sid, pts, driving_type="straight", lane_kind="centerline"):
    return {"id": sid, "points": pts, "driving_type": driving_type, "lane_kind": lane_kind}


def intersection():
    w, box, arm = 1.75, 7.0, 60.0
    sections = [
        sec("in_S", line(w, -arm, w, -box)),
        sec("out_N", line(w, box, w, arm)),
        sec("in_N", line(-w, arm, -w, box)),
        sec("out_S", line(-w, -box, -w, -arm)),
        sec("in_E", line(arm, w, box, w)),
        sec("out_W", line(-box, w, -arm, w)),
        sec("in_W", line(-arm, -w, -box, -w)),
        sec("out_E", line(box, -w, arm, -w)),
        sec("c_S_straight", line(w, -box, w, box), "straight"),
        sec("c_S_left", arc(-box, -box, box + w, 0.0, math.pi / 2), "left_turn"),
        sec("c_S_right", arc(box, -box, box - w, math.pi, math.pi / 2), "right_turn"),
        sec("c_N_straight", line(-w, box, -w, -box), "straight"),
    ]
    edges = [
        ["in_S", "c_S_straight", "connected"],
        ["in_S", "c_S_left", "connected"],
        ["in_S", "c_S_right", "connected"],
        ["c_S_straight", "out_N", "connected"],
        ["c_S_left", "out_W", "connected"],
        ["c_S_right", "out_E", "connected"],
        ["in_N", "c_N_straight", "connected"],
        ["c_N_straight", "out_S", "connected"],
        ["in_S", "c_S_straight", "adjacent_straight"],
        ["c_S_straight", "out_N", "adjacent_straight"],
        ["c_S_left", "out_W", "adjacent_straight"],
        ["c_S_right", "out_E", "adjacent_straight"],
        ["in_S", "c_S_left", "adjacent_left_turn"],
        ["in_S", "c_S_right", "adjacent_right_turn"],
        ["in_S", "out_S", "opposite_direction_adjacent"],
        ["out_S", "in_S", "opposite_direction_adjacent"],
        ["in_N", "out_N", "opposite_direction_adjacent"],
        ["out_N", "in_N", "opposite_direction_adjacent"],
    ]
    return {"half_width": 1.75, "anchor": [w, -40.0, math.pi / 2], "sections": sections, "edges": edges}


def urban_road():
    sections = [
        sec("r0", line(0, 0, 150, 0)),
        sec("r1", line(0, 3.5, 150, 3.5)),
        sec("r2", line(150, 7.0, 0, 7.0)),
    ]
    edges = [
        ["r0", "r1", "same_direction_adjacent"],
        ["r1", "r0", "same_direction_adjacent"],
        ["r1", "r2", "opposite_direction_adjacent"],
        ["r2", "r1", "opposite_direction_adjacent"],
    ]
    for k in range(4):
        x0 = 40 + 30 * k
        sections.append(sec(f"bs{k}", line(x0, -1.75, x0 + 30, -1.75), lane_kind="boundary"))
        sections.append(sec(f"bn{k}", line(x0 + 15, 8.75, x0 - 15, 8.75), lane_kind="boundary"))
        edges.append([f"bs{k}", f"bn{k}", "opposite_boundary"])
        edges.append([f"bn{k}", f"bs{k}", "opposite_boundary"])
    for k in range(3):
        edges.append([f"bs{k}", f"bs{k + 1}", "connected"])
        edges.append([f"bn{k + 1}", f"bn{k}", "connected"])
    return {"half_width": 1.75, "anchor": [10.0, 0.0, 0.0], "sections": sections, "edges": edges}


def two_lane():
    return {
        "half_width": 1.75,
        "sections": [sec("r0", line(0, 0, 100, 0)), sec("r1", line(0, 3.5, 100, 3.5))],
        "edges": [["r0", "r1", "same_direction_adjacent"], ["r1", "r0", "same_direction_adjacent"]],
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in [("intersection", intersection()), ("urban_road", urban_road()), ("two_lane", two_lane())]:
        (OUT / f"{name}.json").write_text(json.dumps(doc, separators=(",", ":")) + "\n")
        print(name, len(doc["sections"]), "sections", len(doc["edges"]), "edges")
