"""Plan and simulate whole scenes; plan bundles and trace bundles on disk."""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import llm
from .lanegraph import LaneGraph, lane_graph_from_dict, lane_graph_to_dict
from .metrics import (collision_rate, format_table, overlay_svg, position_velocity_error, rows_to_csv,
                      within_road_rate)
from .ped import attach_behaviors, ped_rollout
from .plan import OracleResult, ScenePlan, derive_schedule, scene_plan_from_dict, sort_ids
from .planner import (CollisionReport, Footprint, PlannedTrajectory, exchange_interaction_info,
                      handle_collisions, plan_trajectory)
from .vehicle import CAR, TRUCK, DynamicsTrace, EnvConfig, VehEnv, VehicleParams, rollout

LARGE_VEHICLE_WORDS = ("truck", "bus", "lorry")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def vehicle_params(name: str) -> VehicleParams:
    return TRUCK if any(w in name.lower() for w in LARGE_VEHICLE_WORDS) else CAR


def footprints_for(oracle: OracleResult) -> dict[str, Footprint]:
    out = {}
    for s in oracle.init_states:
        if s.agent_type == "pedestrian":
            out[s.agent_id] = Footprint.pedestrian()
        else:
            p = vehicle_params(oracle.agent_list[s.agent_id])
            out[s.agent_id] = Footprint.box(p.L, p.W)
    return out


def intended_contacts(scene: ScenePlan) -> list[tuple[str, str]]:
    """Pairs meant to meet: start/end depends and keypoints placed on another agent's path."""
    pairs = []
    for aid in sort_ids(scene.actors):
        plan = scene.actors[aid]
        if plan.depend_id is None:
            continue
        uses_path = any(k.kind == 2 and k.get("info_type") == "trajectory" for k in plan.keypoints)
        if plan.depend_type in ("end", "start") or uses_path:
            pairs.append((aid, plan.depend_id))
    return pairs


def is_static(scene: ScenePlan, aid: str) -> bool:
    st = scene.oracle.state(aid)
    return st.movement == "static" or st.speed_kmh <= 0


@dataclass
class PlannedScene:
    instruction: str
    scene: ScenePlan
    trajectories: dict[str, PlannedTrajectory]
    report: CollisionReport
    exempt: list[tuple[str, str]]
    llm_stats: dict[str, dict] = field(default_factory=dict)

    def report_dict(self) -> dict:
        return {
            "schedule": list(self.scene.schedule),
            "collision_passes": self.report.passes,
            "adjusted_agents": list(self.report.adjusted),
            "residual_events": [
                {"t": round(e.t, 6), "agent_a": e.agent_a, "agent_b": e.agent_b, "separation": round(e.separation, 6)}
                for e in self.report.residual
            ],
            "exempt_pairs": [list(p) for p in self.exempt],
            "llm": self.llm_stats,
        }


def trajectories_for(scene: ScenePlan, graph: LaneGraph, dt: float = 0.1) -> dict[str, PlannedTrajectory]:
    resolved: dict[str, PlannedTrajectory] = {}
    for aid in scene.schedule:
        ctx = exchange_interaction_info(scene.actors, resolved, aid)
        st = scene.oracle.state(aid)
        resolved[aid] = plan_trajectory(scene.actors[aid], graph, ctx, st.speed, is_static(scene, aid), dt)
    return resolved


def plan_scene(instruction: str, graph: LaneGraph, client: llm.LlmClient, dt: float = 0.1,
               max_retries: int = llm.MAX_RETRIES, collision_passes: int = 5) -> PlannedScene:
    stats = {"oracle": llm.RunStats()}
    oracle = llm.run_oracle(instruction, client, max_retries, stats=stats["oracle"])
    actors = {}
    for agent in llm.agent_inits(oracle):
        stats[agent.name] = llm.RunStats()
        actors[agent.agent_id] = llm.run_actor(agent, oracle.agent_list, client, llm.shared_summary(oracle, agent.agent_id),
                                               max_retries, stats=stats[agent.name])
    scene = ScenePlan(oracle, actors, tuple(derive_schedule(actors)))
    trajs = trajectories_for(scene, graph, dt)
    exempt = intended_contacts(scene)
    report = handle_collisions([trajs[a] for a in scene.schedule], footprints_for(oracle), scene.schedule,
                               exempt, max_passes=collision_passes)
    llm_stats = {k: {"attempts": s.attempts, "retries": s.retries} for k, s in sorted(stats.items())}
    return PlannedScene(instruction, scene, report.trajectories, report, exempt, llm_stats)


# ---------------------------------------------------------------------------
# plan bundle


def write_plan_bundle(planned: PlannedScene, graph: LaneGraph, out_dir) -> Path:
    out = Path(out_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    doc = planned.scene.to_dict()
    doc["instruction"] = planned.instruction
    (out / "plan.json").write_text(_dumps(doc))
    (out / "map.json").write_text(_dumps(lane_graph_to_dict(graph)))
    for aid in sort_ids(planned.trajectories):
        (out / "trajectories" / f"{aid}.csv").write_text(planned.trajectories[aid].to_csv())
    (out / "report.json").write_text(_dumps(planned.report_dict()))
    return out


@dataclass
class PlanBundle:
    scene: ScenePlan
    graph: LaneGraph
    trajectories: dict[str, PlannedTrajectory]
    instruction: str = ""


def read_plan_bundle(path) -> PlanBundle:
    root = Path(path)
    doc = json.loads((root / "plan.json").read_text())
    scene = scene_plan_from_dict(doc)
    graph = lane_graph_from_dict(json.loads((root / "map.json").read_text()))
    trajs = {}
    for aid in scene.schedule:
        f = root / "trajectories" / f"{aid}.csv"
        if not f.exists():
            raise FileNotFoundError(f"plan bundle is missing {f}")
        trajs[aid] = PlannedTrajectory.from_csv(f.read_text(), aid)
    return PlanBundle(scene, graph, trajs, doc.get("instruction", ""))


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimulatedScene:
    traces: dict[str, DynamicsTrace]
    timelines: dict[str, dict]
    rows: list[tuple]
    collision_rate: float


def simulate(bundle: PlanBundle, controller, env_config: EnvConfig | None = None) -> SimulatedScene:
    scene = bundle.scene
    traces: dict[str, DynamicsTrace] = {}
    timelines: dict[str, dict] = {}
    rows = []
    for aid in sort_ids(scene.actors):
        st = scene.oracle.state(aid)
        planned = bundle.trajectories[aid]
        if st.agent_type == "pedestrian":
            trace = ped_rollout(planned)
            timelines[aid] = attach_behaviors(scene.actors[aid], planned, bundle.trajectories).to_dict()
        else:
            env = VehEnv(planned, vehicle_params(scene.oracle.agent_list[aid]), env_config)
            trace, _ = rollout(env, controller) if len(planned) > 1 else (_static_trace(planned), None)
        traces[aid] = trace
        e_pos, e_vel = position_velocity_error(trace, planned)
        wr = within_road_rate(trace, bundle.graph) if st.agent_type == "vehicle" else float("nan")
        rows.append((aid, scene.oracle.agent_list[aid], st.agent_type, e_pos, e_vel, wr))
    rate = collision_rate([traces[a] for a in sort_ids(traces)], footprints_for(scene.oracle),
                          intended_contacts(scene))
    return SimulatedScene(traces, timelines, rows, rate)


def _static_trace(planned: PlannedTrajectory) -> DynamicsTrace:
    n = len(planned)
    return DynamicsTrace(planned.agent_id, planned.dt, planned.t.copy(), planned.p[:, 0].copy(),
                         planned.p[:, 1].copy(), planned.heading.copy(), planned.v_target.copy(),
                         np.zeros(n), np.zeros(n))


METRIC_HEADER = ("agent_id", "name", "type", "e_pos", "e_vel", "within_road")


def write_trace_bundle(sim: SimulatedScene, bundle: PlanBundle, out_dir) -> Path:
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(exist_ok=True)
    for aid in sort_ids(sim.traces):
        (out / "traces" / f"{aid}.csv").write_text(sim.traces[aid].to_csv())
        (out / "plots" / f"{aid}.svg").write_text(overlay_svg(bundle.trajectories[aid], sim.traces[aid]))
    (out / "behaviors.json").write_text(_dumps(sim.timelines))
    (out / "metrics.csv").write_text(rows_to_csv(METRIC_HEADER, sim.rows))
    (out / "summary.json").write_text(_dumps({"collision_rate": sim.collision_rate, "agents": len(sim.traces)}))
    (out / "metrics.txt").write_text(format_table(METRIC_HEADER, sim.rows)
                                     + f"\ncollision_rate {sim.collision_rate:.4f}\n")
    return out


def copy_map(src, out_dir) -> None:
    shutil.copyfile(src, Path(out_dir) / "map.json")
