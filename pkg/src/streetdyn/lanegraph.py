"""Immutable lane-graph model and the geometric queries used by the planner."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels

DRIVING_TYPES = ("straight", "left_turn", "right_turn")
LANE_KINDS = ("centerline", "boundary")
RELATIONS = (
    "same_direction_adjacent",
    "opposite_direction_adjacent",
    "adjacent_straight",
    "adjacent_left_turn",
    "adjacent_right_turn",
    "different_type_adjacent",
    "opposite_boundary",
    "connected",
)
POSITION_RELS = ("left", "right", "front")
DIRECTIONS = {"straight": "straight", "turn left": "left_turn", "turn right": "right_turn"}


class LaneGraphError(Exception):
    """Raised for malformed map files and failed graph queries."""


class NoMatchError(LaneGraphError):
    pass


def normalize_token(text: str) -> str:
    return "_".join(str(text).strip().lower().replace("-", " ").replace("_", " ").split())


def normalize_relation(relation: str) -> str:
    rel = normalize_token(relation)
    if rel not in RELATIONS:
        raise LaneGraphError(f"unknown relation {relation!r}")
    return rel


def normalize_direction(direction: str) -> str:
    key = " ".join(normalize_token(direction).split("_"))
    if key in DIRECTIONS:
        return DIRECTIONS[key]
    if normalize_token(direction) in DRIVING_TYPES:
        return normalize_token(direction)
    raise LaneGraphError(f"unknown driving direction {direction!r}")


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])


@dataclass(frozen=True, eq=False)
class LaneSection:
    id: str
    points: np.ndarray
    driving_type: str
    lane_kind: str
    orientation: np.ndarray = field(repr=False)

    @property
    def headings(self) -> np.ndarray:
        return np.arctan2(self.orientation[:, 1], self.orientation[:, 0])

    @property
    def cumulative_length(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])


def make_section(sid: str, points, driving_type: str, lane_kind: str) -> LaneSection:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise LaneGraphError(f"section {sid!r}: polyline needs at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise LaneGraphError(f"section {sid!r}: non-finite coordinates")
    seg = np.diff(pts, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    if np.any(norms <= 0.0):
        raise LaneGraphError(f"section {sid!r}: consecutive points must be distinct")
    if driving_type not in DRIVING_TYPES:
        raise LaneGraphError(f"section {sid!r}: unknown driving_type {driving_type!r}")
    if lane_kind not in LANE_KINDS:
        raise LaneGraphError(f"section {sid!r}: unknown lane_kind {lane_kind!r}")
    unit = seg / norms[:, None]
    orientation = np.vstack([unit, unit[-1:]])
    pts.setflags(write=False)
    orientation.setflags(write=False)
    return LaneSection(sid, pts, driving_type, lane_kind, orientation)


@dataclass(frozen=True, eq=False)
class LaneGraph:
    sections: dict[str, LaneSection]
    edges: tuple[tuple[str, str, str], ...]
    half_width: float = 1.75
    anchor: Pose | None = None

    def __post_init__(self):
        for a, b, rel in self.edges:
            for sid in (a, b):
                if sid not in self.sections:
                    raise LaneGraphError(f"edge ({a}, {b}, {rel}) references missing section {sid!r}")
            if rel not in RELATIONS:
                raise LaneGraphError(f"edge ({a}, {b}) has unknown relation {rel!r}")
        if not self.half_width > 0:
            raise LaneGraphError("half_width must be positive")
        cl = [s for s in self.sections.values() if s.lane_kind == "centerline"]
        segs = np.concatenate(
            [np.hstack([s.points[:-1], s.points[1:]]) for s in cl]
        ) if cl else np.empty((0, 4))
        object.__setattr__(self, "_centerline_segments", segs)

    def section(self, sid: str) -> LaneSection:
        try:
            return self.sections[sid]
        except KeyError:
            raise LaneGraphError(f"unknown section {sid!r}") from None

    @property
    def ids(self) -> list[str]:
        return sorted(self.sections)

    def reference_pose(self) -> Pose:
        """Scene reference pose for map-based keypoints (defaults to the first section's start)."""
        if self.anchor is not None:
            return self.anchor
        first = self.sections[self.ids[0]]
        return Pose(float(first.points[0, 0]), float(first.points[0, 1]), float(first.headings[0]))

    def nearest_section(self, p, lane_kind: str | None = None) -> str:
        p = np.asarray(p, dtype=np.float64)
        best, best_d = None, math.inf
        for sid in self.ids:
            sec = self.sections[sid]
            if lane_kind is not None and sec.lane_kind != lane_kind:
                continue
            segs = np.hstack([sec.points[:-1], sec.points[1:]])
            d = float(kernels.segment_min_distance(p[None, :], segs)[0])
            if d < best_d:
                best, best_d = sid, d
        if best is None:
            raise NoMatchError("graph has no sections")
        return best

    def centerline_distance(self, points) -> np.ndarray:
        return kernels.segment_min_distance(points, self._centerline_segments)


def load_lane_graph(path) -> LaneGraph:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise LaneGraphError(f"{path}: malformed JSON ({exc})") from exc
    return lane_graph_from_dict(doc)


def lane_graph_from_dict(doc: dict) -> LaneGraph:
    if not isinstance(doc, dict) or "sections" not in doc:
        raise LaneGraphError("lane graph document needs a 'sections' list")
    sections: dict[str, LaneSection] = {}
    for raw in doc["sections"]:
        sid = str(raw.get("id", ""))
        if not sid:
            raise LaneGraphError("section without id")
        if sid in sections:
            raise LaneGraphError(f"duplicate section id {sid!r}")
        sections[sid] = make_section(
            sid,
            raw.get("points", []),
            normalize_token(raw.get("driving_type", "straight")),
            normalize_token(raw.get("lane_kind", "centerline")),
        )
    edges = []
    for raw in doc.get("edges", []):
        if len(raw) != 3:
            raise LaneGraphError(f"edge {raw!r} must be [from, to, relation]")
        a, b, rel = str(raw[0]), str(raw[1]), normalize_token(raw[2])
        if rel not in RELATIONS:
            raise LaneGraphError(f"edge ({a}, {b}) has unknown relation {raw[2]!r}")
        edges.append((a, b, rel))
    anchor = doc.get("anchor")
    return LaneGraph(
        sections=sections,
        edges=tuple(edges),
        half_width=float(doc.get("half_width", 1.75)),
        anchor=Pose(*map(float, anchor)) if anchor is not None else None,
    )


def lane_graph_to_dict(graph: LaneGraph) -> dict:
    doc = {
        "half_width": graph.half_width,
        "sections": [
            {
                "id": s.id,
                "points": s.points.tolist(),
                "driving_type": s.driving_type,
                "lane_kind": s.lane_kind,
            }
            for s in (graph.sections[i] for i in graph.ids)
        ],
        "edges": [list(e) for e in graph.edges],
    }
    if graph.anchor is not None:
        doc["anchor"] = [graph.anchor.x, graph.anchor.y, graph.anchor.heading]
    return doc


def _side_metrics(sec: LaneSection, ref: Pose, half_width: float):
    """(cross, front_distance, nearest_distance) of a section relative to ref."""
    rel = sec.points - ref.position
    h = ref.direction
    dist = np.hypot(rel[:, 0], rel[:, 1])
    i = int(np.argmin(dist))
    cross = h[0] * rel[i, 1] - h[1] * rel[i, 0]
    along = rel @ h
    lateral = h[0] * rel[:, 1] - h[1] * rel[:, 0]
    ahead = (along > 0.0) & (np.abs(lateral) <= half_width + 1e-9)
    front = float(dist[ahead].min()) if ahead.any() else math.inf
    return float(cross), front, float(dist[i])


def find_section(graph: LaneGraph, ref_pose: Pose, position_rel: str, lane_kind: str,
                 direction: str) -> str:
    """Closest section of the requested kind/type on the requested side of ``ref_pose``.

    ``left``/``right`` use the sign of the cross product between the reference
    heading and the vector to the section's nearest point; ``front`` needs a
    polyline point ahead of the reference inside the lane corridor.
    """
    position_rel = normalize_token(position_rel)
    lane_kind = normalize_token(lane_kind)
    driving_type = normalize_direction(direction)
    if position_rel not in POSITION_RELS:
        raise LaneGraphError(f"unknown lane position {position_rel!r}")
    if not graph.sections:
        raise NoMatchError("graph has no sections")
    best, best_d = None, math.inf
    for sid in graph.ids:
        sec = graph.sections[sid]
        if sec.lane_kind != lane_kind or sec.driving_type != driving_type:
            continue
        cross, front, nearest = _side_metrics(sec, ref_pose, graph.half_width)
        if position_rel == "front":
            d = front
        elif position_rel == "left":
            d = nearest if cross > 1e-9 else math.inf
        else:
            d = nearest if cross < -1e-9 else math.inf
        if d < best_d:
            best, best_d = sid, d
    if best is None:
        raise NoMatchError(
            f"no {lane_kind} section ({driving_type}) to the {position_rel} of "
            f"({ref_pose.x:.2f}, {ref_pose.y:.2f})"
        )
    return best


def related_section(graph: LaneGraph, from_id: str, relation: str) -> str:
    graph.section(from_id)
    rel = normalize_relation(relation)
    targets = sorted(b for a, b, r in graph.edges if a == from_id and r == rel)
    if not targets:
        raise NoMatchError(f"section {from_id!r} has no {rel} relation")
    return targets[0]


def point_on_section(graph: LaneGraph, sid: str, strategy: str = "midpoint",
                     ref_pose: Pose | None = None) -> Pose:
    sec = graph.section(sid)
    strategy = normalize_token(strategy)
    headings = sec.headings
    if strategy == "endpoint":
        return Pose(float(sec.points[-1, 0]), float(sec.points[-1, 1]), float(headings[-1]))
    if strategy == "midpoint":
        cum = sec.cumulative_length
        half = 0.5 * cum[-1]
        i = min(int(np.searchsorted(cum, half, side="right")) - 1, len(cum) - 2)
        frac = (half - cum[i]) / (cum[i + 1] - cum[i])
        p = sec.points[i] + frac * (sec.points[i + 1] - sec.points[i])
        return Pose(float(p[0]), float(p[1]), float(headings[i]))
    if strategy == "nearest_ahead":
        if ref_pose is None:
            raise LaneGraphError("nearest_ahead needs a reference pose")
        rel = sec.points - ref_pose.position
        ahead = rel @ ref_pose.direction > 0.0
        if not ahead.any():
            return point_on_section(graph, sid, "endpoint")
        dist = np.where(ahead, np.hypot(rel[:, 0], rel[:, 1]), np.inf)
        i = int(np.argmin(dist))
        return Pose(float(sec.points[i, 0]), float(sec.points[i, 1]), float(headings[i]))
    raise LaneGraphError(f"unknown point strategy {strategy!r}")


def within_road(graph: LaneGraph, p, margin: float = 0.5) -> bool:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    d = graph.centerline_distance(np.asarray(p, dtype=np.float64)[None, :])[0]
    return bool(d <= graph.half_width + margin)


def within_road_mask(graph: LaneGraph, points: Iterable, margin: float = 0.5) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return graph.centerline_distance(pts) <= graph.half_width + margin
