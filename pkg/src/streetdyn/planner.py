"""Keypoint resolution, Bézier interpolation, speed profiling and collision handling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .lanegraph import LaneGraph, Pose, find_section, point_on_section, related_section
from .plan import ActorPlan

SPEED_FACTORS = {-1: 0.7, 0: 1.0, 1: 1.3}
PEDESTRIAN_RADIUS = 0.4


class PlanningError(Exception):
    pass


class DegenerateKeypointsError(PlanningError):
    pass


class MissingDependencyError(PlanningError):
    pass


# ---------------------------------------------------------------------------
# planned trajectories


@dataclass(eq=False)
class PlannedTrajectory:
    agent_id: str
    dt: float
    t: np.ndarray
    p: np.ndarray
    heading: np.ndarray
    v_target: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64).reshape(-1, 2)
        self.heading = np.asarray(self.heading, dtype=np.float64)
        self.v_target = np.asarray(self.v_target, dtype=np.float64)
        n = len(self.t)
        if not (len(self.p) == len(self.heading) == len(self.v_target) == n) or n < 1:
            raise PlanningError("trajectory arrays must be non-empty and of equal length")
        if n > 1 and not np.allclose(np.diff(self.t), self.dt, atol=1e-9):
            raise PlanningError("trajectory timestamps must be uniformly spaced by dt")

    def __len__(self):
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.p, axis=0), axis=1).sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "heading", "v_target"])
        for k in range(len(self)):
            w.writerow([f"{self.t[k]:.6f}", f"{self.p[k, 0]:.6f}", f"{self.p[k, 1]:.6f}",
                        f"{self.heading[k]:.6f}", f"{self.v_target[k]:.6f}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, agent_id: str = "", dt: float | None = None) -> "PlannedTrajectory":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise PlanningError("empty trajectory CSV")
        t = np.array([float(r["t"]) for r in rows])
        if dt is None:
            dt = float(round(t[1] - t[0], 9)) if len(t) > 1 else 0.1
        return cls(
            agent_id, dt, t,
            np.array([[float(r["x"]), float(r["y"])] for r in rows]),
            np.array([float(r["heading"]) for r in rows]),
            np.array([float(r["v_target"]) for r in rows]),
        )

    def copy(self) -> "PlannedTrajectory":
        return PlannedTrajectory(self.agent_id, self.dt, self.t.copy(), self.p.copy(),
                                 self.heading.copy(), self.v_target.copy())


# ---------------------------------------------------------------------------
# interpolation


def _bezier(ctrl: np.ndarray, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)[..., None]
    w = 1.0 - u
    return (w ** 3 * ctrl[0] + 3 * w * w * u * ctrl[1] + 3 * w * u * u * ctrl[2] + u ** 3 * ctrl[3])


def _bezier_deriv(ctrl: np.ndarray, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)[..., None]
    w = 1.0 - u
    return 3 * (w * w * (ctrl[1] - ctrl[0]) + 2 * w * u * (ctrl[2] - ctrl[1]) + u * u * (ctrl[3] - ctrl[2]))


@dataclass(eq=False)
class BezierPath:
    """Piecewise cubic Bézier path, arc-length addressable through a dense table."""

    controls: np.ndarray
    keypoints: np.ndarray
    _u: np.ndarray = field(repr=False)
    _s: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(self._s[-1])

    @property
    def knot_arclengths(self) -> np.ndarray:
        nseg = len(self.controls)
        return np.interp(np.arange(nseg + 1, dtype=np.float64), self._u, self._s)

    def _locate(self, s):
        g = np.interp(np.clip(s, 0.0, self.length), self._s, self._u)
        seg = np.minimum(np.floor(g).astype(int), len(self.controls) - 1)
        return seg, g - seg

    def point_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        seg, u = self._locate(s)
        out = np.empty((len(s), 2))
        for i in np.unique(seg):
            m = seg == i
            out[m] = _bezier(self.controls[i], u[m])
        return out

    def tangent_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        seg, u = self._locate(s)
        out = np.empty((len(s), 2))
        for i in np.unique(seg):
            m = seg == i
            out[m] = _bezier_deriv(self.controls[i], u[m])
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    def heading_at(self, s) -> np.ndarray:
        d = self.tangent_at(s)
        return np.arctan2(d[:, 1], d[:, 0])

    def polyline(self, spacing: float = 0.1) -> np.ndarray:
        """Dense samples at most ``spacing`` apart, knots included exactly."""
        knots = self.knot_arclengths
        pts = [self.keypoints[:1]]
        for i in range(len(self.controls)):
            n = max(1, int(math.ceil((knots[i + 1] - knots[i]) / spacing)))
            s = np.linspace(knots[i], knots[i + 1], n + 1)[1:]
            seg_pts = self.point_at(s)
            seg_pts[-1] = self.keypoints[i + 1]
            pts.append(seg_pts)
        return np.vstack(pts)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def interpolate_keypoints(keypoints, start_heading: float | None = None,
                          headings: Sequence[float | None] | None = None,
                          table_density: int = 400) -> BezierPath:
    """C1 piecewise-cubic Bézier through ``keypoints``.

    Tangents are Catmull-Rom (one-sided at the ends). ``start_heading`` fixes
    the direction of the first tangent; ``headings`` optionally fixes the
    direction at any keypoint, keeping the Catmull-Rom magnitude.
    """
    pts = np.asarray(keypoints, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateKeypointsError("need at least 2 keypoints")
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(gaps < 1e-6):
        i = int(np.argmin(gaps))
        raise DegenerateKeypointsError(f"keypoints {i} and {i + 1} coincide at {pts[i].tolist()}")
    n = len(pts)
    tang = np.empty_like(pts)
    tang[0] = pts[1] - pts[0]
    tang[-1] = pts[-1] - pts[-2]
    if n > 2:
        tang[1:-1] = 0.5 * (pts[2:] - pts[:-2])
    hs = list(headings) if headings is not None else [None] * n
    if start_heading is not None:
        hs[0] = start_heading
    for i, h in enumerate(hs):
        if h is not None:
            mag = np.linalg.norm(tang[i])
            tang[i] = mag * np.array([math.cos(h), math.sin(h)])
    for i in range(n):
        if np.linalg.norm(tang[i]) < 1e-12:
            tang[i] = pts[min(i + 1, n - 1)] - pts[max(i - 1, 0)]
    controls = np.empty((n - 1, 4, 2))
    controls[:, 0] = pts[:-1]
    controls[:, 1] = pts[:-1] + tang[:-1] / 3.0
    controls[:, 2] = pts[1:] - tang[1:] / 3.0
    controls[:, 3] = pts[1:]
    # global parameter g in [0, nseg]; segment i covers [i, i+1]
    u_tab = [np.zeros(1)]
    s_tab = [np.zeros(1)]
    total = 0.0
    for i in range(n - 1):
        u = np.linspace(0.0, 1.0, table_density + 1)
        q = _bezier(controls[i], u)
        ds = np.linalg.norm(np.diff(q, axis=0), axis=1)
        u_tab.append(i + u[1:])
        s_tab.append(total + np.cumsum(ds))
        total += ds.sum()
    return BezierPath(controls, pts.copy(), np.concatenate(u_tab), np.concatenate(s_tab))


def trajectory_from_profile(agent_id: str, path: BezierPath, s: np.ndarray, v: np.ndarray,
                            dt: float) -> PlannedTrajectory:
    s = np.asarray(s, dtype=np.float64)
    t = dt * np.arange(len(s))
    return PlannedTrajectory(agent_id, dt, t, path.point_at(s), path.heading_at(s),
                             np.asarray(v, dtype=np.float64))


def time_parameterize(path: BezierPath, base_speed: float, speed_change: int = 0,
                      dt: float = 0.1, agent_id: str = "", static_duration: float = 20.0,
                      static_heading: float | None = None) -> PlannedTrajectory:
    if base_speed < 0 or dt <= 0:
        raise ValueError("base_speed must be >= 0 and dt > 0")
    v = base_speed * SPEED_FACTORS[int(speed_change)]
    if v <= 0.0:
        n = int(round(static_duration / dt)) + 1
        if static_heading is None:
            d = path.keypoints[1] - path.keypoints[0]
            static_heading = math.atan2(d[1], d[0])
        return PlannedTrajectory(agent_id, dt, dt * np.arange(n), np.repeat(path.keypoints[:1], n, axis=0),
                                 np.full(n, static_heading), np.zeros(n))
    length = path.length
    steps = int(math.ceil(length / (v * dt) - 1e-9))
    s = np.minimum(v * dt * np.arange(steps + 1), length)
    return trajectory_from_profile(agent_id, path, s, np.full(steps + 1, v), dt)


# ---------------------------------------------------------------------------
# keypoint resolution


@dataclass(frozen=True)
class Keypoint:
    position: tuple[float, float]
    heading: float | None = None
    section: str | None = None


@dataclass
class InteractionContext:
    """Information shared with one agent by the agents it depends on."""

    agent_id: str
    target_id: str | None = None
    depend_type: str = "None"
    point: np.ndarray | None = None
    trajectory: PlannedTrajectory | None = None


def exchange_interaction_info(plans: dict[str, ActorPlan], resolved: dict[str, PlannedTrajectory],
                              agent_id: str) -> InteractionContext:
    plan = plans[agent_id]
    if plan.depend_id is None:
        return InteractionContext(agent_id)
    target = resolved.get(plan.depend_id)
    if target is None:
        raise MissingDependencyError(
            f"agent {agent_id!r} needs {plan.depend_type} info from unresolved agent {plan.depend_id!r}")
    ctx = InteractionContext(agent_id, plan.depend_id, plan.depend_type)
    if plan.depend_type == "end":
        ctx.point = target.p[-1].copy()
    elif plan.depend_type == "start":
        ctx.point = target.p[0].copy()
    else:
        ctx.trajectory = target
    return ctx


def _agent_point(spec_info: str, ctx: InteractionContext) -> np.ndarray:
    if ctx.point is not None:
        return ctx.point
    if ctx.trajectory is not None:
        # trajectory info: 'point' -> where the target ends, 'trajectory' -> where it starts
        return ctx.trajectory.p[-1] if spec_info == "point" else ctx.trajectory.p[0]
    raise MissingDependencyError(f"agent {ctx.agent_id!r} has an agent-based keypoint but no shared info")


def resolve_keypoints(plan: ActorPlan, graph: LaneGraph, ctx: InteractionContext | None,
                      start_pose: Pose | None = None, static: bool = False) -> list[Keypoint]:
    ref = start_pose or graph.reference_pose()
    ctx = ctx or InteractionContext(plan.agent_id)
    out: list[Keypoint] = []
    for spec in plan.keypoints:
        if spec.kind == 0:
            sid = find_section(graph, ref, spec.get("position_rel"), spec.get("lane_kind"), spec.get("direction"))
            pose = point_on_section(graph, sid, "nearest_ahead", ref)
        elif spec.kind == 1:
            prev = out[-1] if out else Keypoint((ref.x, ref.y), ref.heading)
            base = prev.section or graph.nearest_section(prev.position)
            sid = related_section(graph, base, spec.get("relation"))
            pose = point_on_section(graph, sid, "midpoint")
        else:
            q = _agent_point(spec.get("info_type"), ctx)
            sid = None
            heading = ref.heading
            if out:
                d = q - np.asarray(out[-1].position)
                if np.linalg.norm(d) > 1e-9:
                    heading = math.atan2(d[1], d[0])
            pose = Pose(float(q[0]), float(q[1]), heading)
        lane_heading = pose.heading if sid is not None and graph.sections[sid].lane_kind == "centerline" else None
        out.append(Keypoint((pose.x, pose.y), lane_heading, sid))
        ref = pose
    if not out:
        if not static:
            raise PlanningError(f"agent {plan.agent_id!r} has no keypoints")
        out.append(Keypoint((ref.x, ref.y), ref.heading, None))
    if static:
        first = out[0]
        h = first.heading
        if h is None and first.section:
            sec = graph.section(first.section)
            i = int(np.argmin(np.linalg.norm(sec.points - np.asarray(first.position), axis=1)))
            h = float(sec.headings[i])
        elif h is None:
            h = ref.heading
        x, y = first.position
        return [Keypoint((x, y), h, first.section),
                Keypoint((x + math.cos(h), y + math.sin(h)), h, first.section)]
    if len(out) == 1:
        only = out[0]
        sid = only.section or graph.nearest_section(only.position)
        end = point_on_section(graph, sid, "endpoint")
        if math.dist(only.position, (end.x, end.y)) < 1.0:
            raise PlanningError(f"agent {plan.agent_id!r}: single keypoint sits at the end of section {sid!r}")
        lane_heading = end.heading if graph.sections[sid].lane_kind == "centerline" else None
        out.append(Keypoint((end.x, end.y), lane_heading, sid))
    return out


def plan_trajectory(plan: ActorPlan, graph: LaneGraph, ctx: InteractionContext | None,
                    base_speed: float, static: bool, dt: float = 0.1,
                    static_duration: float = 20.0, start_pose: Pose | None = None) -> PlannedTrajectory:
    kps = resolve_keypoints(plan, graph, ctx, start_pose, static)
    pts = np.array([k.position for k in kps])
    headings = [k.heading for k in kps]
    path = interpolate_keypoints(pts, headings=headings)
    speed = 0.0 if static else base_speed
    return time_parameterize(path, speed, plan.speed_change, dt, plan.agent_id, static_duration,
                             static_heading=kps[0].heading if static else None)


# ---------------------------------------------------------------------------
# collisions


@dataclass(frozen=True)
class Footprint:
    length: float = 0.0
    width: float = 0.0
    radius: float = 0.0

    @property
    def is_disc(self) -> bool:
        return self.radius > 0.0

    @classmethod
    def pedestrian(cls) -> "Footprint":
        return cls(radius=PEDESTRIAN_RADIUS)

    @classmethod
    def box(cls, length: float, width: float) -> "Footprint":
        return cls(length=length, width=width)


@dataclass(frozen=True)
class CollisionEvent:
    t: float
    agent_a: str
    agent_b: str
    separation: float


def _overlap_series(pa, ha, fa: Footprint, pb, hb, fb: Footprint) -> np.ndarray:
    if fa.is_disc and fb.is_disc:
        return (np.linalg.norm(pa - pb, axis=1) <= fa.radius + fb.radius).astype(np.uint8)
    if fa.is_disc:
        return kernels.disc_obb_overlap_series(pa, fa.radius, pb, hb, fb.length, fb.width)
    if fb.is_disc:
        return kernels.disc_obb_overlap_series(pb, fb.radius, pa, ha, fa.length, fa.width)
    return kernels.obb_overlap_series(pa, ha, fa.length, fa.width, pb, hb, fb.length, fb.width)


def detect_collisions(trajs: Sequence[PlannedTrajectory], footprints: dict[str, Footprint],
                      exempt: Iterable[tuple[str, str]] = ()) -> list[CollisionEvent]:
    """One event per contiguous overlap interval of each agent pair.

    The event time is the instant of minimum centre separation inside the
    interval. Pairs listed in ``exempt`` (either order) are skipped.
    """
    trajs = list(trajs)
    if not trajs:
        return []
    dt = trajs[0].dt
    for tr in trajs:
        if abs(tr.dt - dt) > 1e-12:
            raise PlanningError(f"mismatched dt: {tr.agent_id!r} has {tr.dt}, expected {dt}")
    skip = {frozenset(p) for p in exempt}
    events = []
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            a, b = trajs[i], trajs[j]
            if frozenset((a.agent_id, b.agent_id)) in skip:
                continue
            n = min(len(a), len(b))
            hit = _overlap_series(a.p[:n], a.heading[:n], footprints[a.agent_id],
                                  b.p[:n], b.heading[:n], footprints[b.agent_id])
            if not hit.any():
                continue
            sep = np.linalg.norm(a.p[:n] - b.p[:n], axis=1)
            edges = np.diff(np.concatenate([[0], hit.astype(np.int8), [0]]))
            for lo, hi in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
                k = lo + int(np.argmin(sep[lo:hi]))
                events.append(CollisionEvent(float(a.t[k]), a.agent_id, b.agent_id, float(sep[k])))
    events.sort(key=lambda e: (e.t, e.agent_a, e.agent_b))
    return events


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def slowdown_warp(traj: PlannedTrajectory, t_conflict: float, floor: float = 0.3,
                  half_window: float = 3.0, ramp: float = 1.0) -> PlannedTrajectory:
    """Re-time ``traj`` along its own path with a smooth slowdown around ``t_conflict``.

    Progress time advances at rate ``scale(t)`` which blends from 1 down to
    ``floor`` on ``[t_conflict - half_window, t_conflict + half_window]`` with
    smoothstep ramps of width ``ramp``. The trajectory is extended so that it
    still reaches its original end.
    """
    dt = traj.dt
    t0 = traj.t[0]
    end = traj.t[-1]
    lo, hi = t_conflict - half_window, t_conflict + half_window

    def scale(t):
        w = smoothstep((t - (lo - ramp)) / ramp) * (1.0 - smoothstep((t - hi) / ramp))
        return 1.0 - (1.0 - floor) * w

    taus = [t0]
    scales = [scale(t0)]
    t = t0
    while taus[-1] < end - 1e-12:
        # trapezoidal integration of the progress rate
        s_next = scale(t + dt)
        taus.append(min(taus[-1] + 0.5 * dt * (scales[-1] + s_next), end))
        scales.append(s_next)
        t += dt
        if len(taus) > 100 * len(traj) + 10:
            break
    tau = np.array(taus)
    sc = np.array(scales)
    if len(traj) == 1:
        return traj.copy()
    px = np.interp(tau, traj.t, traj.p[:, 0])
    py = np.interp(tau, traj.t, traj.p[:, 1])
    hd = np.interp(tau, traj.t, np.unwrap(traj.heading))
    vt = np.interp(tau, traj.t, traj.v_target) * sc
    return PlannedTrajectory(traj.agent_id, dt, t0 + dt * np.arange(len(tau)), np.column_stack([px, py]),
                             hd, vt)


@dataclass
class CollisionReport:
    trajectories: dict[str, PlannedTrajectory]
    residual: list[CollisionEvent]
    passes: int
    adjusted: list[str]


def handle_collisions(trajs: Sequence[PlannedTrajectory], footprints: dict[str, Footprint],
                      priority: Sequence[str] | None = None, exempt: Iterable[tuple[str, str]] = (),
                      max_passes: int = 5, floor: float = 0.3, half_window: float = 3.0) -> CollisionReport:
    """Slow the lower-priority agent of the earliest conflict, re-detect, repeat.

    ``priority`` lists agent ids from highest to lowest priority (default: input
    order). A warp is kept only if it does not increase the event count.
    """
    current = {tr.agent_id: tr for tr in trajs}
    order = list(priority) if priority is not None else [tr.agent_id for tr in trajs]
    rank = {a: i for i, a in enumerate(order)}
    exempt = list(exempt)
    events = detect_collisions(list(current.values()), footprints, exempt)
    adjusted: list[str] = []
    passes = 0
    while events and passes < max_passes:
        passes += 1
        ev = events[0]
        low = max((ev.agent_a, ev.agent_b), key=lambda a: rank.get(a, len(rank)))
        trial = dict(current)
        trial[low] = slowdown_warp(current[low], ev.t, floor, half_window)
        new_events = detect_collisions(list(trial.values()), footprints, exempt)
        if len(new_events) <= len(events):
            current = trial
            events = new_events
            adjusted.append(low)
        else:
            break
    return CollisionReport(current, events, passes, adjusted)
