"""Tracking errors, collision and within-road rates, noise robustness, reports and SVG plots."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .lanegraph import LaneGraph, within_road_mask
from .planner import Footprint, PlannedTrajectory, detect_collisions
from .vehicle import CAR, DynamicsTrace, EnvConfig, VehEnv, VehicleParams, rollout

ROBUSTNESS_SIGMAS = (0.0, 0.01, 0.03)


class MisalignedTraceError(ValueError):
    pass


def position_velocity_error(trace: DynamicsTrace, planned: PlannedTrajectory) -> tuple[float, float]:
    n = len(trace)
    if n == 0 or n > len(planned):
        raise MisalignedTraceError(f"trace has {n} samples, plan has {len(planned)}")
    if abs(trace.dt - planned.dt) > 1e-9 or not np.allclose(trace.t, planned.t[:n], atol=1e-6):
        raise MisalignedTraceError("trace timestamps do not line up with the plan")
    e_pos = np.hypot(trace.x - planned.p[:n, 0], trace.y - planned.p[:n, 1]).mean()
    e_vel = np.abs(trace.v - planned.v_target[:n]).mean()
    return float(e_pos), float(e_vel)


def trace_as_plan(trace: DynamicsTrace) -> PlannedTrajectory:
    return PlannedTrajectory(trace.agent_id, trace.dt, trace.t, trace.positions, trace.heading, trace.v)


def colliding_agents(traces: Sequence[DynamicsTrace], footprints: dict[str, Footprint],
                     exempt: Iterable[tuple[str, str]] = ()) -> set[str]:
    events = detect_collisions([trace_as_plan(t) for t in traces], footprints, exempt)
    return {a for e in events for a in (e.agent_a, e.agent_b)}


def collision_rate(traces: Sequence[DynamicsTrace], footprints: dict[str, Footprint],
                   exempt: Iterable[tuple[str, str]] = ()) -> float:
    """Vehicles involved in at least one event over all vehicles (disc footprints are pedestrians)."""
    vehicles = sorted(t.agent_id for t in traces if not footprints[t.agent_id].is_disc)
    if not vehicles:
        return 0.0
    hit = colliding_agents(traces, footprints, exempt)
    return sum(1 for v in vehicles if v in hit) / len(vehicles)


def within_road_rate(trace: DynamicsTrace, graph: LaneGraph, margin: float = 0.5) -> float:
    if len(trace) == 0:
        return 0.0
    return float(within_road_mask(graph, trace.positions, margin).mean())


# ---------------------------------------------------------------------------
# suite evaluation


@dataclass(frozen=True)
class EvalRow:
    case: str
    speed: float
    e_pos: float
    e_vel: float


ControllerFactory = Callable[[], Callable]


def evaluate_case(planned: PlannedTrajectory, controller, params: VehicleParams = CAR,
                  env_config: EnvConfig | None = None) -> tuple[DynamicsTrace, float, float]:
    env = VehEnv(planned, params, env_config)
    trace, _ = rollout(env, controller)
    return (trace, *position_velocity_error(trace, planned))


def evaluate_suite(cases, controller, params: VehicleParams = CAR,
                   env_config: EnvConfig | None = None) -> list[EvalRow]:
    rows = []
    for c in cases:
        _, e_pos, e_vel = evaluate_case(c.planned, controller, params, env_config)
        rows.append(EvalRow(c.name, c.speed, e_pos, e_vel))
    return rows


def speed_table(rows: Sequence[EvalRow]) -> list[tuple[float, float, float]]:
    """(speed, mean e_pos, mean e_vel) per initial speed, ascending."""
    out = []
    for v in sorted({r.speed for r in rows}):
        sel = [r for r in rows if r.speed == v]
        out.append((v, float(np.mean([r.e_pos for r in sel])), float(np.mean([r.e_vel for r in sel]))))
    return out


def perturb_plan(planned: PlannedTrajectory, sigma: float, rng: np.random.Generator) -> PlannedTrajectory:
    """Add zero-mean Gaussian noise of variance ``sigma`` to every waypoint."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return planned.copy()
    p = planned.p + rng.normal(0.0, math.sqrt(sigma), size=planned.p.shape)
    return PlannedTrajectory(planned.agent_id, planned.dt, planned.t, p, planned.heading, planned.v_target)


def noise_robustness(planned: PlannedTrajectory, controller, sigmas=ROBUSTNESS_SIGMAS, seeds: Iterable[int] = (0,),
                     params: VehicleParams = CAR, env_config: EnvConfig | None = None) -> list[tuple[float, float, float]]:
    """(sigma, e_pos, e_vel) averaged over seeds; errors are measured against the clean plan."""
    seeds = list(seeds)
    rows = []
    clean_start = VehEnv(planned, params, env_config).state
    for sigma in sigmas:
        ep, ev = [], []
        for seed in seeds:
            noisy = perturb_plan(planned, sigma, np.random.default_rng(seed))
            env = VehEnv(noisy, params, env_config, init_state=clean_start)
            trace, _ = rollout(env, controller)
            a, b = position_velocity_error(trace, planned)
            ep.append(a)
            ev.append(b)
        rows.append((float(sigma), float(np.mean(ep)), float(np.mean(ev))))
    return rows


# ---------------------------------------------------------------------------
# output


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.6f}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def format_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    cells = [list(header)] + [[f"{x:.4f}" if isinstance(x, float) else str(x) for x in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_lines(series: dict[str, np.ndarray], title: str = "", width: int = 480, height: int = 360,
              equal_aspect: bool = False) -> str:
    """Polylines of (n, 2) arrays in one SVG chart; names go in a legend."""
    pts = np.concatenate([np.asarray(s, dtype=float).reshape(-1, 2) for s in series.values()]) if series else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    if equal_aspect:
        span[:] = span.max()
    pad = 30
    sx = (width - 2 * pad) / span[0]
    sy = (height - 2 * pad) / span[1]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{pad}" y="18" font-size="13" font-family="sans-serif">{title}</text>']
    for i, (name, arr) in enumerate(series.items()):
        arr = np.asarray(arr, dtype=float).reshape(-1, 2)
        coords = " ".join(f"{pad + (x - lo[0]) * sx:.2f},{height - pad - (y - lo[1]) * sy:.2f}" for x, y in arr)
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{width - 150}" y="{20 + 14 * i}" font-size="11" font-family="sans-serif" '
                   f'fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def overlay_svg(planned: PlannedTrajectory, trace: DynamicsTrace, title: str = "") -> str:
    return svg_lines({"plan": planned.p, "executed": trace.positions}, title or planned.agent_id, equal_aspect=True)


def robustness_svg(rows: Sequence[tuple[float, float, float]], title: str = "e_pos vs sigma") -> str:
    return svg_lines({"e_pos": np.array([(r[0], r[1]) for r in rows])}, title)
