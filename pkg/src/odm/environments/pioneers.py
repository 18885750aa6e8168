"""Scripted demonstrators of graded skill for each chain size.

The expert is an open-loop traveling-wave gait: joint i receives torque
A*sin(2*pi*f*(t*dt) + phi*i). Amplitude, frequency and per-joint phase lag
come from a committed parameter file produced by `grid_search_gait`, a
coarse offline search maximizing 200-step flat-terrain return. The other
tiers degrade the expert in ways that mimic snapshots of a learning run.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .chain import DT, ChainEnv, ChainEnvConfig

TIERS = ("expert", "medium-expert", "medium", "medium-replay", "random")

_GAIT_CACHE = None


def load_gait_table() -> dict:
    """{K as str: {amplitude, freq, phase}} from the committed search output."""
    global _GAIT_CACHE
    if _GAIT_CACHE is None:
        with resources.files(__package__).joinpath("gait_params.json").open() as f:
            _GAIT_CACHE = json.load(f)
    return _GAIT_CACHE


def expert_torque(K: int, t: int, gait: dict) -> np.ndarray:
    i = np.arange(K)
    return gait["amplitude"] * np.sin(
        2.0 * np.pi * gait["freq"] * t * DT + gait["phase"] * i)


class PioneerPolicy:
    """One episode's worth of a demonstration tier. Build a fresh one per
    episode so the medium-expert coin flip and noise draws are episodic."""

    def __init__(self, tier: str, K: int, torque_limit: float, max_steps: int,
                 rng: np.random.Generator, gait: dict = None):
        if tier not in TIERS:
            raise ValueError(f"unknown tier '{tier}'")
        self.tier = tier
        self.K = K
        self.limit = torque_limit
        self.max_steps = max_steps
        self.rng = rng
        self.gait = gait or load_gait_table()[str(K)]
        # medium-expert: choose the behavior for the whole episode up front
        self._as_medium = tier == "medium-expert" and rng.uniform() < 0.5

    def __call__(self, state: np.ndarray, t: int) -> np.ndarray:
        tier = self.tier
        if tier == "random":
            return self.rng.uniform(-self.limit, self.limit, self.K)
        a = expert_torque(self.K, t, self.gait)
        if tier == "medium" or (tier == "medium-expert" and self._as_medium):
            a = a + self.rng.normal(0.0, 0.3 * self.limit, self.K)
        elif tier == "medium-replay":
            sigma = 0.5 * self.limit * (1.0 - t / self.max_steps)
            a = a + self.rng.normal(0.0, sigma, self.K)
        return a


def rollout_return(env: ChainEnv, policy, seed: int) -> float:
    obs = env.reset(seed)
    total = 0.0
    done = False
    t = 0
    while not done:
        obs, r, done = env.step(policy(obs, t))
        total += r
        t += 1
    return total


def grid_search_gait(K: int, steps: int = 200, seed: int = 0) -> dict:
    """Coarse amplitude x frequency x phase sweep on flat terrain."""
    best, best_ret = None, -np.inf
    amps = [0.2, 0.4, 0.6, 0.8, 1.0]
    freqs = [0.05, 0.1, 0.2, 0.35, 0.5]
    phases = [np.pi / 2, 3 * np.pi / 4, np.pi, 3 * np.pi / 2]
    env = ChainEnv(ChainEnvConfig(K=K, max_steps=steps))
    for a in amps:
        for f in freqs:
            for p in phases:
                gait = {"amplitude": a, "freq": f, "phase": p}
                ret = rollout_return(
                    env, lambda s, t: expert_torque(K, t, gait), seed)
                if ret > best_ret:
                    best, best_ret = gait, ret
    best["search_return"] = round(best_ret, 6)
    return best
