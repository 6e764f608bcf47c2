"""Point-agent pedestrian proxy: kinematic plan tracking plus behaviour annotations.

Humanoid physics is not modelled. Pedestrians follow their planned path at
bounded speed and carry behaviour tags that a downstream renderer can use.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .plan import INTERACTIONS, ActorPlan
from .planner import PlannedTrajectory
from .vehicle import DynamicsTrace

V_MAX = 3.0
INTERACTION_WINDOW = 3.0


class UnknownTargetError(LookupError):
    pass


@dataclass(frozen=True)
class PedState:
    x: float
    y: float
    heading: float
    v: float = 0.0


def ped_step(s: PedState, planned: PlannedTrajectory, t: float, dt: float, v_max: float = V_MAX) -> PedState:
    """Head for the plan sample one step after ``t`` at no more than ``v_max``."""
    k = int(round((t - planned.t[0]) / planned.dt))
    target = planned.p[min(max(k + 1, 0), len(planned) - 1)]
    dx, dy = target[0] - s.x, target[1] - s.y
    dist = math.hypot(dx, dy)
    speed = min(dist / dt, v_max)
    if speed <= 0.0:
        return PedState(s.x, s.y, s.heading, 0.0)
    step = speed * dt
    return PedState(s.x + dx / dist * step, s.y + dy / dist * step, math.atan2(dy, dx), speed)


def ped_rollout(planned: PlannedTrajectory, v_max: float = V_MAX, init: PedState | None = None) -> DynamicsTrace:
    s = init or PedState(float(planned.p[0, 0]), float(planned.p[0, 1]), float(planned.heading[0]), 0.0)
    rows = [s]
    for k in range(len(planned) - 1):
        s = ped_step(s, planned, float(planned.t[k]), planned.dt, v_max)
        rows.append(s)
    n = len(rows)
    return DynamicsTrace(planned.agent_id, planned.dt, planned.t.copy(),
                         np.array([r.x for r in rows]), np.array([r.y for r in rows]),
                         np.array([r.heading for r in rows]), np.array([r.v for r in rows]),
                         np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class BehaviorEntry:
    t_start: float
    t_end: float
    tag: str
    target_agent: str | None = None


@dataclass(frozen=True)
class BehaviorTimeline:
    agent_id: str
    entries: tuple[BehaviorEntry, ...] = ()

    def to_dict(self) -> dict:
        return {"agent_id": self.agent_id, "entries": [asdict(e) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def interaction_tag(behavior: str) -> str | None:
    text = behavior.strip().rstrip(".").lower()
    for name in INTERACTIONS:
        if name in text:
            return name
    return None


def closest_approach_time(a: PlannedTrajectory, b: PlannedTrajectory) -> float:
    """Time of minimum separation over the shared sample range (ties: earliest)."""
    n = min(len(a), len(b))
    d = np.hypot(*(a.p[:n] - b.p[:n]).T)
    return float(a.t[int(np.argmin(d))])


def attach_behaviors(plan: ActorPlan, traj: PlannedTrajectory,
                     others: dict[str, PlannedTrajectory] | None = None,
                     window: float = INTERACTION_WINDOW) -> BehaviorTimeline:
    behavior = (plan.behavior or "None").strip().rstrip(".")
    if behavior.lower() in ("", "none"):
        return BehaviorTimeline(plan.agent_id)
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    tag = interaction_tag(behavior)
    if tag is None:
        return BehaviorTimeline(plan.agent_id, (BehaviorEntry(t0, t1, behavior),))
    target = plan.depend_id
    others = others or {}
    if target is None or target not in others:
        raise UnknownTargetError(f"agent {plan.agent_id}: interaction {tag!r} names unknown target {target!r}")
    tc = closest_approach_time(traj, others[target])
    lo, hi = max(t0, tc - window / 2), min(t1, tc + window / 2)
    return BehaviorTimeline(plan.agent_id, (BehaviorEntry(round(lo, 9), round(hi, 9), tag, target),))
