"""Desk-scale tracking suite: analytic reference paths at fixed initial speeds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .planner import PlannedTrajectory

SPEEDS = (0.0, 5.0, 10.0, 20.0)
SHAPES = ("straight", "circle", "s_curve")
HORIZON = 120
RAMP_ACCEL = 1.0
RAMP_SPEED = 5.0


@dataclass(frozen=True)
class SuiteCase:
    shape: str
    speed: float
    planned: PlannedTrajectory

    @property
    def name(self) -> str:
        return f"{self.shape}@{self.speed:g}"


def _curve(shape: str, s: np.ndarray, radius: float = 30.0, amplitude: float = 4.0,
           wavelength: float = 80.0) -> tuple[np.ndarray, np.ndarray]:
    """Points and headings at arc lengths ``s`` for one analytic shape."""
    if shape == "straight":
        return np.column_stack([s, np.zeros_like(s)]), np.zeros_like(s)
    if shape == "circle":
        th = s / radius
        return np.column_stack([radius * np.sin(th), radius * (1.0 - np.cos(th))]), th
    if shape == "s_curve":
        # sinusoid sampled densely in x, then re-indexed by arc length
        k = 2.0 * math.pi / wavelength
        x = np.linspace(0.0, float(s.max()) + 1.0, max(2000, int(20 * (s.max() + 1.0))))
        dy = amplitude * k * np.cos(k * x)
        seg = np.hypot(np.diff(x), np.diff(amplitude * np.sin(k * x)))
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        xs = np.interp(s, arc, x)
        return np.column_stack([xs, amplitude * np.sin(k * xs)]), np.arctan(np.interp(xs, x, dy))
    raise ValueError(f"unknown shape {shape!r}")


def speed_profile(v0: float, n: int, dt: float = 0.1) -> np.ndarray:
    if v0 > 0:
        return np.full(n, float(v0))
    return np.minimum(RAMP_ACCEL * dt * np.arange(n), RAMP_SPEED)


def make_plan(shape: str, v0: float, horizon: int = HORIZON, dt: float = 0.1, agent_id: str = "ego",
              **shape_kw) -> PlannedTrajectory:
    n = horizon + 1
    v = speed_profile(v0, n, dt)
    # same update order as the bicycle model: speed first, then position
    s = np.concatenate([[0.0], np.cumsum(v[1:] * dt)])
    p, heading = _curve(shape, s, **shape_kw)
    return PlannedTrajectory(agent_id, dt, dt * np.arange(n), p, heading, v)


def desk_suite(shapes=SHAPES, speeds=SPEEDS, horizon: int = HORIZON) -> list[SuiteCase]:
    return [SuiteCase(shape, float(v), make_plan(shape, v, horizon)) for v in speeds for shape in shapes]


def desk_env_factory(env_config=None, horizon: int = HORIZON, max_speed: float = 22.0):
    """Random training episodes over the suite shapes: random speed, start index and small start offsets."""
    from .vehicle import PRESETS, VehEnv, VehicleState

    presets = [PRESETS[k] for k in sorted(PRESETS)]

    def factory(rng: np.random.Generator):
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        v0 = 0.0 if rng.random() < 0.2 else float(rng.uniform(1.0, max_speed))
        plan = make_plan(shape, v0, horizon)
        params = presets[int(rng.integers(len(presets)))]
        k = int(rng.integers(0, horizon - 20))
        lat, dh = rng.normal(0.0, 0.2), rng.normal(0.0, 0.02)
        h = float(plan.heading[k])
        init = VehicleState(float(plan.p[k, 0] - lat * math.sin(h)), float(plan.p[k, 1] + lat * math.cos(h)),
                            max(0.0, float(plan.v_target[k] + rng.normal(0.0, 0.3))), h + dh,
                            float(rng.uniform(-0.05, 0.05)))
        return VehEnv(plan, params, env_config, init_state=init, start_index=k)

    return factory
