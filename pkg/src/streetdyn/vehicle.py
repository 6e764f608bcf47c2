"""Bicycle-model execution environment, pure-pursuit baseline and rollouts."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .planner import PlannedTrajectory

DELTA_MAX = 0.6
DDELTA_MAX = 0.05
ACCEL_MAX = 4.0


class PlanExhaustedError(Exception):
    """Raised when stepping or steering past the last planned sample."""


@dataclass(frozen=True)
class VehicleParams:
    L: float
    W: float
    lf: float
    lr: float

    def __post_init__(self):
        if min(self.L, self.W, self.lf, self.lr) <= 0:
            raise ValueError("vehicle parameters must be positive")
        if self.lf + self.lr > self.L + 1e-12:
            raise ValueError("lf + lr must not exceed the vehicle length")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.L, self.W, self.lf, self.lr)


CAR = VehicleParams(2.7, 1.8, 0.9, 0.9)
TRUCK = VehicleParams(6.1, 2.5, 2.3, 2.0)
PRESETS = {"car": CAR, "truck": TRUCK}


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    v: float
    phi: float
    delta: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class VehicleAction:
    ddelta: float = 0.0
    accel: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.ddelta, self.accel])

    def clamped(self) -> "VehicleAction":
        return VehicleAction(min(max(self.ddelta, -DDELTA_MAX), DDELTA_MAX),
                             min(max(self.accel, -ACCEL_MAX), ACCEL_MAX))


def slip_angle(delta: float, p: VehicleParams) -> float:
    return math.atan(p.lr / (p.lf + p.lr) * math.tan(delta))


def circle_radius(delta: float, p: VehicleParams) -> float:
    """Radius traced by the reference point at constant steering ``delta``."""
    return (p.lf + p.lr) / (math.cos(slip_angle(delta, p)) * math.tan(delta))


def bicycle_step(s: VehicleState, u: VehicleAction, p: VehicleParams, dt: float,
                 substeps: int = 5) -> VehicleState:
    u = u.clamped()
    x, y, v, phi, delta = kernels.bicycle_step(s.x, s.y, s.v, s.phi, s.delta, u.ddelta, u.accel,
                                               p.lf, p.lr, dt, substeps, DELTA_MAX)
    return VehicleState(x, y, v, phi, delta)


def filter_action(prev: VehicleAction, raw: VehicleAction, alpha: float) -> VehicleAction:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return VehicleAction(alpha * prev.ddelta + (1.0 - alpha) * raw.ddelta,
                         alpha * prev.accel + (1.0 - alpha) * raw.accel).clamped()


def to_vehicle_frame(points: np.ndarray, s: VehicleState) -> np.ndarray:
    c, sn = math.cos(s.phi), math.sin(s.phi)
    d = np.asarray(points, dtype=np.float64) - (s.x, s.y)
    return np.column_stack([c * d[:, 0] + sn * d[:, 1], -sn * d[:, 0] + c * d[:, 1]])


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.1
    substeps: int = 5
    future_steps: int = 10
    history_steps: int = 5
    max_obstacles: int = 4
    obstacle_range: float = 10.0
    obstacle_coef: float = -0.5
    action_weight: float = 0.1
    alpha: float = 0.0
    pos_scale: float = 20.0
    speed_scale: float = 20.0
    param_scale: float = 10.0
    near_scale: float = 2.0

    @property
    def obs_dim(self) -> int:
        return 2 * self.future_steps + self.history_steps + 4 + 3 + 4 + 3 * self.max_obstacles

    def header(self) -> dict:
        return {
            "future_steps": self.future_steps,
            "history_steps": self.history_steps,
            "max_obstacles": self.max_obstacles,
            "obs_dim": self.obs_dim,
        }


@dataclass
class Observation:
    traj_slice: np.ndarray
    vel_history: np.ndarray
    params: np.ndarray
    steer: float
    prev_action: np.ndarray
    near_targets: np.ndarray
    obstacle_block: np.ndarray
    obstacle_mask: np.ndarray

    def vector(self, cfg: EnvConfig) -> np.ndarray:
        obs_part = self.obstacle_block.copy()
        obs_part[:, 0] /= math.pi
        obs_part[:, 1] /= cfg.obstacle_range
        return np.concatenate([
            self.traj_slice.ravel() / cfg.pos_scale,
            self.vel_history / cfg.speed_scale,
            self.params / cfg.param_scale,
            [self.steer / DELTA_MAX, self.prev_action[0] / DDELTA_MAX, self.prev_action[1] / ACCEL_MAX],
            np.clip(self.near_targets.ravel() / cfg.near_scale, -5.0, 5.0),
            np.column_stack([obs_part, self.obstacle_mask]).ravel(),
        ])


class VehEnv:
    """Single-vehicle tracking environment over one planned trajectory."""

    def __init__(self, planned: PlannedTrajectory, params: VehicleParams = CAR,
                 config: EnvConfig | None = None, obstacles: Sequence[Obstacle] = (),
                 init_state: VehicleState | None = None, start_index: int = 0):
        self.planned = planned
        self.params = params
        self.config = config or EnvConfig()
        if abs(planned.dt - self.config.dt) > 1e-9:
            raise ValueError(f"plan dt {planned.dt} differs from control dt {self.config.dt}")
        self.obstacles = list(obstacles)
        self._init_state = init_state
        self._start_index = start_index
        self.reset()

    def default_state(self, k: int = 0) -> VehicleState:
        pl = self.planned
        return VehicleState(float(pl.p[k, 0]), float(pl.p[k, 1]), float(pl.v_target[k]),
                            float(pl.heading[k]), 0.0)

    def reset(self, init_state: VehicleState | None = None, start_index: int | None = None) -> np.ndarray:
        if start_index is not None:
            self._start_index = start_index
        if init_state is not None:
            self._init_state = init_state
        self.step_index = self._start_index
        self.state = self._init_state or self.default_state(self.step_index)
        self.prev_action = VehicleAction()
        self.speeds = [self.state.v] * self.config.history_steps
        return self.observe()

    @property
    def steps_left(self) -> int:
        return len(self.planned) - 1 - self.step_index

    def target(self, k: int) -> np.ndarray:
        return self.planned.p[min(k, len(self.planned) - 1)]

    def build_observation(self) -> Observation:
        cfg = self.config
        s = self.state
        n = len(self.planned)
        idx = np.minimum(np.arange(self.step_index + 1, self.step_index + 1 + cfg.future_steps), n - 1)
        traj = to_vehicle_frame(self.planned.p[idx], s)
        near = to_vehicle_frame(self.planned.p[[min(self.step_index, n - 1), idx[0]]], s)
        block = np.zeros((cfg.max_obstacles, 2))
        mask = np.zeros(cfg.max_obstacles)
        if self.obstacles:
            rows = []
            for i, ob in enumerate(self.obstacles):
                rel = to_vehicle_frame(np.array([[ob.x, ob.y]]), s)[0]
                clearance = math.hypot(rel[0], rel[1]) - ob.radius
                if clearance < cfg.obstacle_range:
                    rows.append((clearance, i, math.atan2(rel[1], rel[0])))
            rows.sort()
            for j, (clearance, _, bearing) in enumerate(rows[:cfg.max_obstacles]):
                block[j] = (bearing, clearance)
                mask[j] = 1.0
        return Observation(
            traj_slice=traj,
            vel_history=np.array(self.speeds[::-1][:cfg.history_steps]),
            params=np.array(self.params.as_tuple()),
            steer=s.delta,
            prev_action=self.prev_action.as_array(),
            near_targets=near,
            obstacle_block=block,
            obstacle_mask=mask,
        )

    def observe(self) -> np.ndarray:
        return self.build_observation().vector(self.config)

    def reward(self, u: VehicleAction, next_state: VehicleState, k_next: int | None = None) -> float:
        cfg = self.config
        k_next = self.step_index + 1 if k_next is None else k_next
        target = self.target(k_next)
        r_pos = -math.hypot(target[0] - next_state.x, target[1] - next_state.y)
        r_act = -(abs(u.ddelta) + abs(u.accel))
        r_obs = 0.0
        for ob in self.obstacles:
            clearance = math.hypot(ob.x - next_state.x, ob.y - next_state.y) - ob.radius
            if clearance < cfg.obstacle_range:
                r_obs += cfg.obstacle_coef / max(clearance, 0.1)
        return r_pos + cfg.action_weight * r_act + r_obs

    def step(self, raw: VehicleAction):
        if self.steps_left <= 0:
            raise PlanExhaustedError("planned trajectory exhausted")
        cfg = self.config
        u = filter_action(self.prev_action, raw, cfg.alpha)
        nxt = bicycle_step(self.state, u, self.params, cfg.dt, cfg.substeps)
        r = self.reward(u, nxt)
        target = self.target(self.step_index + 1)
        pos_err = math.hypot(target[0] - nxt.x, target[1] - nxt.y)
        self.state = nxt
        self.prev_action = u
        self.step_index += 1
        self.speeds.append(nxt.v)
        del self.speeds[:-cfg.history_steps]
        done = self.steps_left <= 0
        return self.observe(), r, done, {"action": u, "pos_err": pos_err}


# ---------------------------------------------------------------------------
# pure pursuit


def pure_pursuit(state: VehicleState, planned: PlannedTrajectory, lookahead: float,
                 params: VehicleParams, k: int = 0, dt: float = 0.1, window: int = 50) -> VehicleAction:
    """Geometric pursuit of the plan point ``lookahead`` metres of arc past the closest point.

    Steering geometry is taken at the rear axle; speed is commanded towards the
    next planned target speed in one step.
    """
    if lookahead <= 0:
        raise ValueError("lookahead must be positive")
    n = len(planned)
    if k >= n - 1:
        raise PlanExhaustedError("fewer than one planned waypoint remains")
    lo, hi = max(0, k - window), min(n, k + window + 1)
    seg = planned.p[lo:hi]
    i = lo + int(np.argmin(np.hypot(seg[:, 0] - state.x, seg[:, 1] - state.y)))
    target = planned.p[-1]
    acc = 0.0
    for j in range(i, n - 1):
        step = math.hypot(*(planned.p[j + 1] - planned.p[j]))
        if acc + step >= lookahead:
            f = (lookahead - acc) / step
            target = planned.p[j] + f * (planned.p[j + 1] - planned.p[j])
            break
        acc += step
    rx = state.x - params.lr * math.cos(state.phi)
    ry = state.y - params.lr * math.sin(state.phi)
    dx, dy = target[0] - rx, target[1] - ry
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        steer = state.delta
    else:
        bearing = math.atan2(dy, dx) - state.phi
        steer = math.atan(2.0 * (params.lf + params.lr) * math.sin(bearing) / dist)
    steer = min(max(steer, -DELTA_MAX), DELTA_MAX)
    v_target = float(planned.v_target[min(k + 1, n - 1)])
    return VehicleAction(steer - state.delta, (v_target - state.v) / dt).clamped()


def pursuit_lookahead(speed: float, gain: float = 0.3, minimum: float = 1.5) -> float:
    return max(minimum, gain * speed)


class PurePursuitController:
    def __init__(self, lookahead: float | None = None, gain: float = 0.3, minimum: float = 1.5):
        self.lookahead = lookahead
        self.gain = gain
        self.minimum = minimum

    def __call__(self, env: VehEnv) -> VehicleAction:
        la = self.lookahead
        if la is None:
            la = pursuit_lookahead(float(env.planned.v_target[env.step_index]), self.gain, self.minimum)
        return pure_pursuit(env.state, env.planned, la, env.params, env.step_index, env.config.dt)


def zero_controller(env: VehEnv) -> VehicleAction:
    return VehicleAction()


# ---------------------------------------------------------------------------
# rollouts


@dataclass
class DynamicsTrace:
    agent_id: str
    dt: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    v: np.ndarray
    steer: np.ndarray
    reward: np.ndarray
    actions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def __len__(self):
        return len(self.t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "heading", "v", "steer", "reward"])
        for k in range(len(self.t)):
            w.writerow([f"{self.t[k]:.6f}", f"{self.x[k]:.6f}", f"{self.y[k]:.6f}", f"{self.heading[k]:.6f}",
                        f"{self.v[k]:.6f}", f"{self.steer[k]:.6f}", f"{self.reward[k]:.6f}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, agent_id: str = "") -> "DynamicsTrace":
        rows = list(csv.DictReader(io.StringIO(text)))
        col = {k: np.array([float(r[k]) for r in rows]) for k in ("t", "x", "y", "heading", "v", "steer", "reward")}
        dt = float(round(col["t"][1] - col["t"][0], 9)) if len(rows) > 1 else 0.1
        return cls(agent_id, dt, **col)

    @classmethod
    def from_positions(cls, agent_id: str, dt: float, t, p, heading, v) -> "DynamicsTrace":
        n = len(t)
        p = np.asarray(p, dtype=np.float64)
        return cls(agent_id, dt, np.asarray(t, dtype=np.float64), p[:, 0].copy(), p[:, 1].copy(),
                   np.asarray(heading, dtype=np.float64), np.asarray(v, dtype=np.float64),
                   np.zeros(n), np.zeros(n))


Controller = Callable[[VehEnv], VehicleAction]


def rollout(env: VehEnv, controller: Controller, steps: int | None = None,
            agent_id: str | None = None) -> tuple[DynamicsTrace, np.ndarray]:
    """Closed loop observe -> control -> filter -> bicycle step; row 0 is the initial state."""
    steps = env.steps_left if steps is None else steps
    if steps > env.steps_left:
        raise PlanExhaustedError(f"requested {steps} steps but only {env.steps_left} planned steps remain")
    states = [env.state]
    rewards = [0.0]
    actions = []
    for _ in range(steps):
        raw = controller(env)
        _, r, _, info = env.step(raw)
        states.append(env.state)
        rewards.append(r)
        actions.append(info["action"].as_array())
    k0 = env.step_index - steps
    t = env.planned.t[k0:k0 + steps + 1].copy()
    arr = np.array([[s.x, s.y, s.phi, s.v, s.delta] for s in states])
    trace = DynamicsTrace(agent_id if agent_id is not None else env.planned.agent_id, env.config.dt, t,
                          arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], np.array(rewards),
                          np.array(actions).reshape(-1, 2))
    return trace, np.array(rewards[1:])


def mean_action_change(trace: DynamicsTrace) -> float:
    """Mean norm of consecutive applied-action differences, in bound-normalised units."""
    a = trace.actions / np.array([DDELTA_MAX, ACCEL_MAX])
    if len(a) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(a, axis=0), axis=1).mean())


def with_alpha(cfg: EnvConfig, alpha: float) -> EnvConfig:
    return replace(cfg, alpha=alpha)
