"""Planning protocol data model: oracle output, actor output and scheduling.

Speeds cross the LLM boundary in km/h and are exposed in m/s via
``InitState.speed``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any

AGENT_TYPES = ("pedestrian", "vehicle")
VEHICLE_MOVEMENTS = (
    "static", "straight", "pull over", "turn over", "overtake",
    "turn left", "turn right", "straight left", "straight right",
)
PEDESTRIAN_MOVEMENTS = ("static", "crossing", "straight")
DEPEND_TYPES = ("end", "start", "trajectory", "None")
SPEED_CHANGES = (-1, 0, 1)
KEYPOINT_POSITIONS = ("left", "right", "front")
KEYPOINT_LANE_TYPES = ("centerline", "boundary")
KEYPOINT_DIRECTIONS = ("turn left", "turn right", "straight")
KEYPOINT_RELATIONSHIPS = (
    "opposite direction adjacent", "same direction adjacent", "adjacent straight",
    "adjacent left turn", "adjacent right turn", "different type adjacent", "opposite boundary",
)
INFO_TYPES = ("point", "trajectory")
INTERACTIONS = ("pushing", "patting", "walking with arm around shoulder")

_TYPE_SYNONYMS = {
    "car": "vehicle", "truck": "vehicle", "bus": "vehicle", "taxi": "vehicle", "van": "vehicle",
    "ped": "pedestrian", "person": "pedestrian", "human": "pedestrian",
}
_MOVEMENT_SYNONYMS = {"overtaking": "overtake"}
KMH = 1.0 / 3.6


class SchemaError(ValueError):
    """Validation failure; ``errors`` lists every violated field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ScheduleError(ValueError):
    def __init__(self, message: str, cycle: list[str] | None = None):
        self.cycle = cycle or []
        super().__init__(message)


def _key(k: str) -> str:
    return "_".join(str(k).strip().lower().replace("-", " ").replace("_", " ").split())


def _words(v: Any) -> str:
    return " ".join(str(v).strip().lower().replace("_", " ").replace("-", " ").split())


def _normalized_keys(doc: dict) -> dict:
    return {_key(k): v for k, v in doc.items()}


@dataclass(frozen=True)
class InitState:
    agent_id: str
    agent_type: str
    movement: str
    speed_kmh: float

    @property
    def speed(self) -> float:
        """Initial speed in m/s."""
        return self.speed_kmh * KMH


@dataclass(frozen=True)
class OracleResult:
    agent_list: dict[str, str]
    init_states: tuple[InitState, ...]
    guide_texts: dict[str, str]

    def state(self, agent_id: str) -> InitState:
        for s in self.init_states:
            if s.agent_id == agent_id:
                return s
        raise KeyError(agent_id)

    @property
    def ids(self) -> list[str]:
        return sort_ids(self.agent_list)

    def to_dict(self) -> dict:
        return {
            "agent_list": dict(self.agent_list),
            "init_states": [
                {"agent_id": s.agent_id, "agent_type": s.agent_type,
                 "movement": s.movement, "speed": s.speed_kmh}
                for s in self.init_states
            ],
            "guide_texts": dict(self.guide_texts),
        }


@dataclass(frozen=True)
class KeypointSpec:
    kind: int
    params: tuple[tuple[str, str], ...]

    def get(self, name: str) -> str:
        return dict(self.params)[name]

    def to_dict(self) -> dict:
        p = dict(self.params)
        if self.kind == 0:
            body = {"position": p["position_rel"], "lane_type": p["lane_kind"], "direction": p["direction"]}
        elif self.kind == 1:
            body = {"relationship": p["relation"].replace("_", " ")}
        else:
            body = {"info_type": p["info_type"]}
        return {str(self.kind): body}


@dataclass(frozen=True)
class ActorPlan:
    agent_id: str
    depend_id: str | None
    depend_type: str
    speed_change: int
    keypoints: tuple[KeypointSpec, ...]
    behavior: str = "None"

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "depend": [self.depend_id if self.depend_id is not None else -1, self.depend_type],
            "speed_change": self.speed_change,
            "keypoints": [k.to_dict() for k in self.keypoints],
            "behavior": self.behavior,
        }


@dataclass(frozen=True)
class ScenePlan:
    oracle: OracleResult
    actors: dict[str, ActorPlan]
    schedule: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "oracle": self.oracle.to_dict(),
            "actors": {k: self.actors[k].to_dict() for k in sort_ids(self.actors)},
            "schedule": list(self.schedule),
        }


def sort_ids(ids) -> list[str]:
    ids = [str(i) for i in ids]
    if all(i.lstrip("-").isdigit() for i in ids):
        return sorted(ids, key=int)
    return sorted(ids)


def _id(v: Any) -> str:
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    return str(v).strip()


def validate_oracle_output(doc: Any) -> OracleResult:
    if not isinstance(doc, dict):
        raise SchemaError(["oracle output must be a JSON object"])
    d = _normalized_keys(doc)
    errors: list[str] = []
    if "init_state" in d and "init_states" not in d:
        d["init_states"] = d.pop("init_state")
    for name in ("agent_list", "init_states", "guide_texts"):
        if name not in d:
            errors.append(f"missing field '{name}'")
    if errors:
        raise SchemaError(errors)

    agent_list = d["agent_list"]
    if not isinstance(agent_list, dict) or not agent_list:
        errors.append("'agent_list' must be a non-empty object of id -> name")
        agent_list = {}
    agent_list = {_id(k): str(v) for k, v in agent_list.items()}
    names = list(agent_list.values())
    if len(set(names)) != len(names):
        errors.append("'agent_list' names must be distinct")

    raw_states = d["init_states"]
    if not isinstance(raw_states, list):
        errors.append("'init_states' must be a list")
        raw_states = []
    states = []
    for i, raw in enumerate(raw_states):
        if not isinstance(raw, dict):
            errors.append(f"init_states[{i}] must be an object")
            continue
        r = _normalized_keys(raw)
        missing = [f for f in ("agent_id", "agent_type", "movement", "speed") if f not in r]
        if missing:
            errors.append(f"init_states[{i}] missing {', '.join(repr(m) for m in missing)}")
            continue
        aid = _id(r["agent_id"])
        atype = _words(r["agent_type"])
        atype = _TYPE_SYNONYMS.get(atype, atype)
        movement = _words(r["movement"])
        movement = _MOVEMENT_SYNONYMS.get(movement, movement)
        if atype not in AGENT_TYPES:
            errors.append(f"init_states[{i}].agent_type {r['agent_type']!r} not in {list(AGENT_TYPES)}")
        else:
            vocab = VEHICLE_MOVEMENTS if atype == "vehicle" else PEDESTRIAN_MOVEMENTS
            if movement not in vocab:
                errors.append(f"init_states[{i}].movement {r['movement']!r} not allowed for {atype}; expected one of {list(vocab)}")
        try:
            speed = float(r["speed"])
        except (TypeError, ValueError):
            errors.append(f"init_states[{i}].speed must be a number")
            continue
        if not speed >= 0:
            errors.append(f"init_states[{i}].speed must be >= 0")
        states.append(InitState(aid, atype, movement, speed))

    guide = d["guide_texts"]
    if not isinstance(guide, dict):
        errors.append("'guide_texts' must be an object of id -> text")
        guide = {}
    guide = {_id(k): str(v) for k, v in guide.items()}

    ids = set(agent_list)
    state_ids = [s.agent_id for s in states]
    if len(set(state_ids)) != len(state_ids):
        errors.append("'init_states' has duplicate agent ids")
    if set(state_ids) != ids and raw_states and not any("init_states[" in e for e in errors):
        errors.append(f"'init_states' ids {sort_ids(set(state_ids))} do not match agent_list ids {sort_ids(ids)}")
    if set(guide) != ids:
        errors.append(f"'guide_texts' ids {sort_ids(guide)} do not match agent_list ids {sort_ids(ids)}")
    if errors:
        raise SchemaError(errors)
    order = {aid: n for n, aid in enumerate(sort_ids(ids))}
    states.sort(key=lambda s: order[s.agent_id])
    return OracleResult(agent_list, tuple(states), guide)


def _keypoint(raw: Any, i: int, errors: list[str]) -> KeypointSpec | None:
    if not isinstance(raw, dict) or len(raw) != 1:
        errors.append(f"keypoints[{i}] must be a single-entry object {{type: params}}")
        return None
    (kind_raw, body), = raw.items()
    try:
        kind = int(kind_raw)
    except (TypeError, ValueError):
        kind = -1
    if kind not in (0, 1, 2):
        errors.append(f"keypoints[{i}] type {kind_raw!r} not in ['0', '1', '2']")
        return None
    if not isinstance(body, dict):
        errors.append(f"keypoints[{i}] parameters must be an object")
        return None
    b = _normalized_keys(body)
    if kind == 0:
        expected = {"position": KEYPOINT_POSITIONS, "lane_type": KEYPOINT_LANE_TYPES, "direction": KEYPOINT_DIRECTIONS}
    elif kind == 1:
        expected = {"relationship": KEYPOINT_RELATIONSHIPS}
    else:
        expected = {"info_type": INFO_TYPES}
    extra = sorted(set(b) - set(expected))
    if extra:
        errors.append(f"keypoints[{i}] (type {kind}) has unexpected parameters {extra}")
    values = {}
    for name, vocab in expected.items():
        if name not in b:
            errors.append(f"keypoints[{i}] (type {kind}) missing parameter '{name}'")
            continue
        v = _words(b[name])
        if v not in vocab:
            errors.append(f"keypoints[{i}].{name} {b[name]!r} not in {list(vocab)}")
        values[name] = v
    if len(values) != len(expected):
        return None
    if kind == 0:
        params = (("position_rel", values["position"]), ("lane_kind", values["lane_type"]),
                  ("direction", values["direction"]))
    elif kind == 1:
        params = (("relation", values["relationship"].replace(" ", "_")),)
    else:
        params = (("info_type", values["info_type"]),)
    return KeypointSpec(kind, params)


def validate_actor_output(doc: Any, agent_id: str | None = None, agent_type: str | None = None,
                          movement: str | None = None) -> ActorPlan:
    if not isinstance(doc, dict):
        raise SchemaError(["actor output must be a JSON object"])
    d = _normalized_keys(doc)
    for alt in ("keypoints_list", "keypoint_list", "keypoint"):
        if alt in d and "keypoints" not in d:
            d["keypoints"] = d.pop(alt)
    errors: list[str] = []
    for name in ("depend", "speed_change", "keypoints"):
        if name not in d:
            errors.append(f"missing field '{name}'")
    if agent_type == "pedestrian" and "behavior" not in d:
        errors.append("missing field 'behavior'")
    if errors:
        raise SchemaError(errors)

    depend_id, depend_type = None, "None"
    dep = d["depend"]
    if not isinstance(dep, (list, tuple)) or len(dep) != 2:
        errors.append("'depend' must be [depend_agent_id, depend_type]")
    else:
        raw_id, raw_type = dep
        depend_type = "None" if str(raw_type).strip().lower() in ("none", "null") else str(raw_type).strip().lower()
        if depend_type not in DEPEND_TYPES:
            errors.append(f"depend_type {raw_type!r} not in {list(DEPEND_TYPES)}")
        sid = _id(raw_id)
        if sid == "-1":
            if depend_type != "None":
                errors.append("depend agent -1 requires depend_type 'None'")
        else:
            depend_id = sid
            if depend_type == "None":
                errors.append("depend_type 'None' requires depend agent -1")
            if agent_id is not None and sid == str(agent_id):
                errors.append("an agent cannot depend on itself")

    sc = d["speed_change"]
    if isinstance(sc, bool) or not isinstance(sc, (int, float)) or int(sc) != sc or int(sc) not in SPEED_CHANGES:
        errors.append(f"'speed_change' {sc!r} not in [-1, 0, 1]")
        sc = 0
    sc = int(sc)

    raw_kps = d["keypoints"]
    kps: list[KeypointSpec] = []
    if not isinstance(raw_kps, list):
        errors.append("'keypoints' must be a list")
    else:
        for i, raw in enumerate(raw_kps):
            k = _keypoint(raw, i, errors)
            if k is not None:
                kps.append(k)
        if not raw_kps and movement != "static":
            errors.append("'keypoints' must be non-empty for moving agents")
        if kps and kps[0].kind != 0 and depend_type != "trajectory":
            errors.append("first keypoint must be type 0 unless depend_type is 'trajectory'")
        if any(k.kind == 2 for k in kps) and depend_id is None:
            errors.append("agent-based keypoints (type 2) need a depend agent")

    behavior = d.get("behavior", "None")
    behavior = "None" if behavior is None else str(behavior).strip()
    if behavior.endswith(".") and behavior.rstrip(".").strip():
        behavior = behavior.rstrip(".").strip()
    if not behavior or behavior.lower() == "none":
        behavior = "None"
    if agent_type == "vehicle" and behavior != "None":
        errors.append(f"vehicle behavior must be 'None', got {behavior!r}")
    if errors:
        raise SchemaError(errors)
    return ActorPlan(str(agent_id) if agent_id is not None else _id(d.get("agent_id", "")),
                     depend_id, depend_type, sc, tuple(kps), behavior)


def derive_schedule(actors: dict[str, ActorPlan]) -> list[str]:
    """Topological order of the depend graph; ready agents are taken in id order."""
    ids = sort_ids(actors)
    rank = {a: n for n, a in enumerate(ids)}
    children: dict[str, list[str]] = {a: [] for a in ids}
    indeg = {a: 0 for a in ids}
    for a in ids:
        dep = actors[a].depend_id
        if dep is None:
            continue
        if dep not in actors:
            raise ScheduleError(f"agent {a!r} depends on unknown agent {dep!r}")
        children[dep].append(a)
        indeg[a] += 1
    ready = [(rank[a], a) for a in ids if indeg[a] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, a = heapq.heappop(ready)
        order.append(a)
        for c in children[a]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, (rank[c], c))
    if len(order) < len(ids):
        cycle = _find_cycle({a: actors[a].depend_id for a in ids if indeg[a] > 0})
        raise ScheduleError(f"dependency cycle: {' -> '.join(cycle + cycle[:1])}", cycle)
    return order


def _find_cycle(parent: dict[str, str | None]) -> list[str]:
    start = sort_ids(parent)[0]
    seen: list[str] = []
    node = start
    while node not in seen:
        seen.append(node)
        node = parent[node]
    cycle = seen[seen.index(node):]
    first = sort_ids(cycle)[0]
    i = cycle.index(first)
    return cycle[i:] + cycle[:i]


def schedule_layers(actors: dict[str, ActorPlan], schedule: list[str]) -> list[list[str]]:
    """Group a schedule into layers with no depends inside a layer."""
    depth: dict[str, int] = {}
    for a in schedule:
        dep = actors[a].depend_id
        depth[a] = 0 if dep is None else depth[dep] + 1
    layers: list[list[str]] = [[] for _ in range(max(depth.values(), default=-1) + 1)]
    for a in schedule:
        layers[depth[a]].append(a)
    return layers


def interaction_groups(actors: dict[str, ActorPlan]) -> list[list[str]]:
    """Weakly connected components of the depend graph."""
    parent = {a: a for a in actors}

    def root(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, plan in actors.items():
        if plan.depend_id is not None and plan.depend_id in parent:
            parent[root(a)] = root(plan.depend_id)
    groups: dict[str, list[str]] = {}
    for a in sort_ids(actors):
        groups.setdefault(root(a), []).append(a)
    return sorted(groups.values(), key=lambda g: sort_ids(g)[0])


def scene_plan_from_dict(doc: dict) -> ScenePlan:
    oracle = validate_oracle_output(doc["oracle"])
    actors = {}
    for aid, raw in doc["actors"].items():
        st = oracle.state(str(aid))
        actors[str(aid)] = validate_actor_output(raw, str(aid), st.agent_type, st.movement)
    schedule = tuple(str(a) for a in doc.get("schedule") or derive_schedule(actors))
    check_schedule(actors, schedule)
    return ScenePlan(oracle, actors, schedule)


def check_schedule(actors: dict[str, ActorPlan], schedule) -> None:
    if sorted(schedule) != sorted(actors):
        raise ScheduleError("schedule is not a permutation of the agent ids")
    pos = {a: i for i, a in enumerate(schedule)}
    for a, plan in actors.items():
        if plan.depend_id is not None and pos[plan.depend_id] > pos[a]:
            raise ScheduleError(f"agent {a!r} is scheduled before its dependency {plan.depend_id!r}")
