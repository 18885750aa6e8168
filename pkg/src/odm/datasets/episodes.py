"""Episode records and their line-delimited on-disk form.

One episode per line. Each line is plain JSON, but floats are written by
us with 17 significant digits so a write -> read -> write cycle is
byte-identical and every 64-bit value survives exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..environments.chain import make_env
from ..environments.pioneers import PioneerPolicy


@dataclass
class EpisodeRecord:
    env: str
    tier: str
    seed: int
    obs_pro: np.ndarray   # (T, K*n) padded per-joint block, flattened
    obs_ext: np.ndarray   # (T, x)
    actions: np.ndarray   # (T, K*m) padded, flattened
    rewards: np.ndarray   # (T,)
    terminal: bool

    def __post_init__(self):
        T = self.rewards.shape[0]
        if not (self.obs_pro.shape[0] == self.obs_ext.shape[0]
                == self.actions.shape[0] == T):
            raise ValueError("step array lengths disagree")

    @property
    def length(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


def _fmt(arr: np.ndarray) -> str:
    flat = np.asarray(arr, float)
    if flat.ndim == 1:
        return "[" + ",".join("%.17g" % v for v in flat) + "]"
    return "[" + ",".join(_fmt(row) for row in flat) + "]"


def episode_to_line(ep: EpisodeRecord) -> str:
    return ('{"env":%s,"tier":%s,"seed":%d,"obs_pro":%s,"obs_ext":%s,'
            '"actions":%s,"rewards":%s,"terminal":%s}' % (
                json.dumps(ep.env), json.dumps(ep.tier), ep.seed,
                _fmt(ep.obs_pro), _fmt(ep.obs_ext), _fmt(ep.actions),
                _fmt(ep.rewards), "true" if ep.terminal else "false"))


def episode_from_line(line: str) -> EpisodeRecord:
    d = json.loads(line)
    return EpisodeRecord(
        env=d["env"], tier=d["tier"], seed=int(d["seed"]),
        obs_pro=np.asarray(d["obs_pro"], float),
        obs_ext=np.asarray(d["obs_ext"], float),
        actions=np.asarray(d["actions"], float),
        rewards=np.asarray(d["rewards"], float),
        terminal=bool(d["terminal"]))


def write_episodes(path, episodes) -> None:
    with open(path, "w") as f:
        for ep in episodes:
            f.write(episode_to_line(ep))
            f.write("\n")


def read_episodes(path) -> list:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(episode_from_line(line))
    return out


def collect_episode(env, policy, seed: int) -> EpisodeRecord:
    """Roll one episode; observations are stored in padded layout."""
    spec = env.spec
    obs = env.reset(seed)
    pro, ext, acts, rews = [], [], [], []
    done, t = False, 0
    while not done:
        grid, ext_vec = spec.pad_state(obs)
        a = np.asarray(policy(obs, t), float)
        obs, r, done = env.step(a)
        pro.append(grid.ravel())
        ext.append(ext_vec)
        acts.append(spec.pad_action(a.reshape(spec.n_a)).ravel())
        rews.append(r)
        t += 1
    return EpisodeRecord(env.name, getattr(policy, "tier", "scripted"),
                         seed, np.array(pro), np.array(ext),
                         np.array(acts), np.array(rews), terminal=False)


def generate_episodes(env_name: str, tier: str, episode_count: int, seed: int,
                      max_steps: int = 200) -> list:
    """Deterministic pioneer rollouts; episode e draws its own seeds."""
    env = make_env(env_name, max_steps=max_steps)
    root = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    env_seeds = root.integers(0, 2 ** 62, size=max(episode_count, 1))
    out = []
    for e in range(episode_count):
        pol_rng = np.random.default_rng(np.random.SeedSequence([seed, 2, e]))
        pol = PioneerPolicy(tier, env.cfg.K, env.cfg.torque_limit,
                            env.cfg.max_steps, pol_rng)
        out.append(collect_episode(env, pol, seed=int(env_seeds[e])))
    return out
