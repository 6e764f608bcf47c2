"""TD3 trainer for the tracking environment, plus the policy checkpoint format."""

from __future__ import annotations

import csv
import io
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .nn import Adam, Mlp, NonFiniteError, soft_update
from .vehicle import ACCEL_MAX, DDELTA_MAX, EnvConfig, VehEnv, VehicleAction

log = logging.getLogger(__name__)

ACTION_DIM = 2
ACTION_SCALE = np.array([DDELTA_MAX, ACCEL_MAX])
FULL_ACTOR = (256, 256, 128, 128, 64, 64)
FULL_CRITIC = (1024, 512, 256, 128)
MAGIC = b"SDYNPOL\0"
VERSION = 1


class DivergenceError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class Td3Config:
    # short horizon: tracking reward is dense, and a long horizon made the critics noisier
    gamma: float = 0.9
    tau: float = 0.005
    policy_delay: int = 2
    target_noise: float = 0.2
    noise_clip: float = 0.5
    explore_noise: float = 0.1
    batch_size: int = 256
    total_steps: int = 150_000
    start_steps: int = 2_000
    episode_len: int = 60
    buffer_size: int = 200_000
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (64, 64)
    reward_scale: float = 1.0
    max_tracking_error: float = 2.0
    seed: int = 0

    def __post_init__(self):
        self.actor_hidden = tuple(self.actor_hidden)
        self.critic_hidden = tuple(self.critic_hidden)
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.total_steps < 0 or self.batch_size < 1:
            raise ValueError("total_steps must be >= 0 and batch_size >= 1")

    @classmethod
    def full_sized(cls, **kw) -> "Td3Config":
        return cls(actor_hidden=FULL_ACTOR, critic_hidden=FULL_CRITIC, **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "Td3Config":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown TD3 config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["actor_hidden"] = list(self.actor_hidden)
        d["critic_hidden"] = list(self.critic_hidden)
        return d


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int = ACTION_DIM):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self._i = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done) -> None:
        i = self._i
        self.obs[i], self.act[i], self.rew[i], self.next_obs[i], self.done[i] = obs, act, rew, next_obs, done
        self._i = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=n)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx]


@dataclass
class Policy:
    """Deterministic actor; maps scaled observations to bounded actions."""

    actor: Mlp
    env_config: EnvConfig = field(default_factory=EnvConfig)

    def act_normalized(self, obs: np.ndarray) -> np.ndarray:
        return np.tanh(self.actor.forward(obs))

    def act(self, obs: np.ndarray) -> VehicleAction:
        a = self.act_normalized(obs) * ACTION_SCALE
        return VehicleAction(float(a[0]), float(a[1]))

    def __call__(self, env: VehEnv) -> VehicleAction:
        return self.act(env.observe())


# ---------------------------------------------------------------------------
# checkpoint


def _header(policy: Policy) -> dict:
    return {"widths": list(policy.actor.widths), "observation": policy.env_config.header(),
            "action_scale": ACTION_SCALE.tolist()}


def policy_to_bytes(policy: Policy) -> bytes:
    head = json.dumps(_header(policy), sort_keys=True).encode()
    body = policy.actor.flat().astype("<f8").tobytes()
    return MAGIC + struct.pack("<II", VERSION, len(head)) + head + body


def policy_from_bytes(data: bytes, env_config: EnvConfig | None = None) -> Policy:
    env_config = env_config or EnvConfig()
    if len(data) < len(MAGIC) + 8 or not data.startswith(MAGIC):
        raise CheckpointError("not a policy checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<II", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = len(MAGIC) + 8
    try:
        head = json.loads(data[start:start + hlen])
    except ValueError as exc:
        raise CheckpointError(f"corrupted checkpoint header: {exc}") from None
    if head.get("observation") != env_config.header():
        raise CheckpointError(f"observation config mismatch: checkpoint {head.get('observation')} "
                              f"vs environment {env_config.header()}")
    widths = head["widths"]
    if widths[0] != env_config.obs_dim or widths[-1] != ACTION_DIM:
        raise CheckpointError(f"checkpoint widths {widths} do not fit observation/action sizes")
    actor = Mlp.zeros(widths)
    body = data[start + hlen:]
    if len(body) != 8 * actor.n_params:
        raise CheckpointError(f"checkpoint holds {len(body)} parameter bytes, expected {8 * actor.n_params}")
    actor.set_flat(np.frombuffer(body, dtype="<f8"))
    actor.check_finite()
    return Policy(actor, env_config)


def save_policy(policy: Policy, path) -> None:
    Path(path).write_bytes(policy_to_bytes(policy))


def load_policy(path, env_config: EnvConfig | None = None) -> Policy:
    return policy_from_bytes(Path(path).read_bytes(), env_config)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpisodeLog:
    episode: int
    steps: int
    ret: float
    pos_err: float


def log_to_csv(entries: list[EpisodeLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode", "steps", "return", "pos_err"])
    for e in entries:
        w.writerow([e.episode, e.steps, repr(e.ret), repr(e.pos_err)])
    return buf.getvalue()


@dataclass
class TrainResult:
    policy: Policy
    log: list[EpisodeLog]
    critic_loss: float = float("nan")


class _Td3:
    def __init__(self, cfg: Td3Config, obs_dim: int, rng: np.random.Generator):
        self.cfg = cfg
        self.actor = Mlp.init((obs_dim, *cfg.actor_hidden, ACTION_DIM), rng, out_scale=3e-3)
        self.critics = [Mlp.init((obs_dim + ACTION_DIM, *cfg.critic_hidden, 1), rng, out_scale=3e-3)
                        for _ in range(2)]
        self.actor_t = self.actor.copy()
        self.critics_t = [c.copy() for c in self.critics]
        self.actor_opt = Adam(cfg.actor_lr)
        self.critic_opts = [Adam(cfg.critic_lr), Adam(cfg.critic_lr)]
        self.updates = 0

    def update(self, batch, rng: np.random.Generator) -> float:
        cfg = self.cfg
        obs, act, rew, nxt, done = batch
        n = len(obs)
        noise = np.clip(rng.normal(0.0, cfg.target_noise, size=act.shape), -cfg.noise_clip, cfg.noise_clip)
        a_next = np.clip(np.tanh(self.actor_t.forward(nxt)) + noise, -1.0, 1.0)
        sa_next = np.concatenate([nxt, a_next], axis=1)
        q_next = np.minimum(self.critics_t[0].forward(sa_next), self.critics_t[1].forward(sa_next))[:, 0]
        y = rew + cfg.gamma * (1.0 - done) * q_next
        sa = np.concatenate([obs, act], axis=1)
        loss = 0.0
        for critic, opt in zip(self.critics, self.critic_opts):
            q, acts = critic.forward(sa, cache=True)
            err = q[:, 0] - y
            loss += float(np.mean(err ** 2))
            grads, _ = critic.backward(acts, (2.0 / n) * err[:, None])
            opt.step(critic.params(), grads)
        if not np.isfinite(loss):
            raise DivergenceError("critic loss is not finite; try a lower learning rate")
        self.updates += 1
        if self.updates % cfg.policy_delay == 0:
            z, a_acts = self.actor.forward(obs, cache=True)
            a = np.tanh(z)
            q, c_acts = self.critics[0].forward(np.concatenate([obs, a], axis=1), cache=True)
            _, g_in = self.critics[0].backward(c_acts, np.full_like(q, -1.0 / n))
            g_z = g_in[:, -ACTION_DIM:] * (1.0 - a ** 2)
            grads, _ = self.actor.backward(a_acts, g_z)
            self.actor_opt.step(self.actor.params(), grads)
            soft_update(self.actor_t, self.actor, cfg.tau)
            for t, c in zip(self.critics_t, self.critics):
                soft_update(t, c, cfg.tau)
        return loss


EnvFactory = Callable[[np.random.Generator], VehEnv]


def td3_train(env_factory: EnvFactory, cfg: Td3Config, env_config: EnvConfig | None = None,
              progress: Callable[[EpisodeLog], None] | None = None) -> TrainResult:
    """Seeded single-threaded TD3; returns the actor and one log row per episode.

    ``env_factory(rng)`` must return a freshly reset environment.
    """
    env_config = env_config or EnvConfig()
    rng = np.random.default_rng(cfg.seed)
    agent = _Td3(cfg, env_config.obs_dim, rng)
    buf = ReplayBuffer(min(cfg.buffer_size, max(cfg.total_steps, 1)), env_config.obs_dim)
    entries: list[EpisodeLog] = []
    loss = float("nan")
    step = 0
    while step < cfg.total_steps:
        env = env_factory(rng)
        if env.config.obs_dim != env_config.obs_dim:
            raise ValueError("environment observation size differs from the trainer's")
        obs = env.observe()
        ret, err_sum, n = 0.0, 0.0, 0
        while step < cfg.total_steps and n < cfg.episode_len and env.steps_left > 0:
            if step < cfg.start_steps:
                a = rng.uniform(-1.0, 1.0, size=ACTION_DIM)
            else:
                a = np.tanh(agent.actor.forward(obs)) + rng.normal(0.0, cfg.explore_noise, size=ACTION_DIM)
                a = np.clip(a, -1.0, 1.0)
            scaled = a * ACTION_SCALE
            nxt, r, done, info = env.step(VehicleAction(float(scaled[0]), float(scaled[1])))
            # plan end and episode cut are both time limits: bootstrap through them
            buf.add(obs, a, cfg.reward_scale * r, nxt, 0.0)
            obs = nxt
            ret += r
            err_sum += info["pos_err"]
            n += 1
            step += 1
            if step >= cfg.start_steps and len(buf) >= cfg.batch_size:
                loss = agent.update(buf.sample(cfg.batch_size, rng), rng)
            if info["pos_err"] > cfg.max_tracking_error:
                break
        if n == 0:
            continue
        entry = EpisodeLog(len(entries), step, ret, err_sum / n)
        entries.append(entry)
        if progress:
            progress(entry)
    try:
        agent.actor.check_finite()
    except NonFiniteError as exc:
        raise DivergenceError(f"{exc}; try a lower learning rate") from None
    return TrainResult(Policy(agent.actor, env_config), entries, loss)
