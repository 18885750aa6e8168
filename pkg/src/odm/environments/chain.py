"""Planar K-joint chain crawler with terrain variants.

A body of K torque-driven joints crawls along x by undulation. Per step,
in order (all arrays over joints):

    tau   = clip(action, +-torque_limit)
    omega <- omega + dt * (tau - damping * omega)      (+ process noise)
    theta <- wrap(theta + dt * omega)   into (-pi, pi]
    thrust = gain * sum_i sin(theta_i - theta_{i+1}) * omega_i
    v_x   = thrust / terrain_drag(head_x)
    head  <- head + dt * (v_x, v_y)
    reward = dt * v_x - 0.001 * |tau|^2

so coordinated traveling waves move the head and uncoordinated twitching
does not. The observation is the compact state vector: (theta_i, omega_i)
per joint, then head x/y and velocity x/y.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..model.morphology import MorphologySpec

DT = 0.05
LATERAL_GAIN = 0.2


@dataclass
class ChainEnvConfig:
    K: int
    link_length: float = 1.0
    damping: float = 0.5
    torque_limit: float = 1.0
    thrust_gain: float = 1.0
    terrain: str = "flat"  # flat | variable | obstacle
    terrain_params: dict = field(default_factory=dict)
    process_noise_std: float = 0.0
    max_steps: int = 200

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K >= 1 required")
        if self.terrain not in ("flat", "variable", "obstacle"):
            raise ValueError(f"unknown terrain '{self.terrain}'")


@dataclass
class EnvState:
    theta: np.ndarray  # (K,) rad in (-pi, pi]
    omega: np.ndarray  # (K,) rad/s
    head: np.ndarray   # (2,) x, y
    vel: np.ndarray    # (2,)
    t: int


def wrap_angle(theta: np.ndarray) -> np.ndarray:
    """Into (-pi, pi]."""
    w = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def terrain_modifier(x: float, terrain: str, params: dict) -> float:
    """Drag multiplier at head position x."""
    if terrain == "flat":
        return 1.0
    if terrain == "variable":
        period = params.get("period", 4.0)
        return 1.25 + 0.75 * np.sin(2.0 * np.pi * x / period)
    if terrain == "obstacle":
        start = params.get("start", 1.0)
        width = params.get("width", 1.0)
        return 10.0 if start <= x < start + width else 1.0
    raise ValueError(f"unknown terrain '{terrain}'")


class ChainEnv:
    def __init__(self, cfg: ChainEnvConfig, name: str = None):
        self.cfg = cfg
        suffix = {"flat": "", "variable": "-vt", "obstacle": "-obs"}[cfg.terrain]
        self.name = name or f"chain-{cfg.K}{suffix}"
        self.spec = MorphologySpec(self.name, cfg.K, n=2, m=1, x=4)
        self.state: EnvState = None
        self._rng = None

    def reset(self, seed: int) -> np.ndarray:
        """Near-rest pose with a small seeded perturbation; head at origin."""
        self._rng = np.random.default_rng(seed)
        K = self.cfg.K
        self.state = EnvState(
            theta=wrap_angle(self._rng.uniform(-0.05, 0.05, K)),
            omega=np.zeros(K),
            head=np.zeros(2),
            vel=np.zeros(2),
            t=0)
        return self.observe()

    def observe(self) -> np.ndarray:
        s = self.state
        prop = np.stack([s.theta, s.omega], axis=1)  # (K, 2)
        return np.concatenate([prop.ravel(), s.head, s.vel])

    def step(self, action: np.ndarray):
        """-> (obs, reward, done). Torques are clamped to the limit."""
        cfg = self.cfg
        s = self.state
        if s is None:
            raise RuntimeError("reset before step")
        action = np.asarray(action, float).reshape(cfg.K)
        if not np.all(np.isfinite(action)):
            raise ValueError("non-finite action")
        tau = np.clip(action, -cfg.torque_limit, cfg.torque_limit)

        omega = s.omega + DT * (tau - cfg.damping * s.omega)
        if cfg.process_noise_std > 0.0:
            omega = omega + self._rng.normal(0.0, cfg.process_noise_std, cfg.K)
        theta = wrap_angle(s.theta + DT * omega)

        if cfg.K > 1:
            thrust = cfg.thrust_gain * float(
                np.sum(np.sin(theta[:-1] - theta[1:]) * omega[:-1]))
        else:
            thrust = 0.0
        drag = terrain_modifier(float(s.head[0]), cfg.terrain, cfg.terrain_params)
        v_x = thrust / drag
        v_y = LATERAL_GAIN * float(np.mean(np.sin(theta)))
        head = s.head + DT * np.array([v_x, v_y])

        reward = DT * v_x - 1e-3 * float(tau @ tau)
        self.state = EnvState(theta, omega, head, np.array([v_x, v_y]), s.t + 1)
        done = self.state.t >= cfg.max_steps
        if not np.all(np.isfinite(self.observe())):
            done = True
        return self.observe(), reward, done


_NAME_RE = re.compile(r"^chain-(\d+)(-vt|-obs)?$")


def make_env(name: str, max_steps: int = 200,
             process_noise_std: float = 0.0) -> ChainEnv:
    """Build an environment from a name like chain-4, chain-3-vt, chain-5-obs."""
    m = _NAME_RE.match(name)
    if not m:
        raise ValueError(f"bad environment name '{name}'")
    terrain = {None: "flat", "-vt": "variable", "-obs": "obstacle"}[m.group(2)]
    cfg = ChainEnvConfig(K=int(m.group(1)), terrain=terrain,
                         process_noise_std=process_noise_std,
                         max_steps=max_steps)
    return ChainEnv(cfg, name=name)
