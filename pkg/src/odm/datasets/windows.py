"""Fixed-length training windows cut from stored episodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model.morphology import MorphologySpec
from .episodes import EpisodeRecord


@dataclass
class TrajectoryWindow:
    """T_w consecutive steps in compact layout, left-padded when short.

    Pad rows (the first n_pad of each array) hold zeros; timesteps are
    absolute env step indices for the real rows.
    """
    states: np.ndarray     # (T_w, n_s)
    actions: np.ndarray    # (T_w, n_a)
    rewards: np.ndarray    # (T_w,)
    timesteps: np.ndarray  # (T_w,) intp
    n_pad: int
    episode_start: bool
    env: str = ""
    tier: str = ""

    @property
    def valid_mask(self) -> np.ndarray:
        """True at real rows, false at padded rows."""
        m = np.ones(self.states.shape[0], bool)
        m[:self.n_pad] = False
        return m


def episode_windows(ep: EpisodeRecord, spec: MorphologySpec,
                    t_w: int) -> list:
    """Non-overlapping T_w windows covering every step exactly once.

    The final short window (if any) is left-padded up to T_w.
    """
    if t_w < 1:
        raise ValueError("t_w >= 1 required")
    T = ep.length
    grids = ep.obs_pro.reshape(T, spec.K, spec.n)
    states = np.concatenate([grids[:, spec.state_mask], ep.obs_ext], axis=1)
    actions = ep.actions.reshape(T, spec.K, spec.m)[:, spec.action_mask]
    out = []
    for start in range(0, T, t_w):
        stop = min(start + t_w, T)
        real = stop - start
        pad = t_w - real
        w = TrajectoryWindow(
            states=np.concatenate([np.zeros((pad, spec.n_s)),
                                   states[start:stop]]),
            actions=np.concatenate([np.zeros((pad, spec.n_a)),
                                    actions[start:stop]]),
            rewards=np.concatenate([np.zeros(pad), ep.rewards[start:stop]]),
            timesteps=np.concatenate([np.zeros(pad, np.intp),
                                      np.arange(start, stop)]),
            n_pad=pad,
            episode_start=start == 0,
            env=ep.env, tier=ep.tier)
        out.append(w)
    return out


def stack_windows(windows) -> dict:
    """Batch a list of TrajectoryWindow into arrays for the model."""
    return {
        "states": np.stack([w.states for w in windows]),
        "actions": np.stack([w.actions for w in windows]),
        "timesteps": np.stack([w.timesteps for w in windows]),
        "n_pad": np.array([w.n_pad for w in windows], np.intp),
        "valid": np.stack([w.valid_mask for w in windows]),
        "episode_start": np.array([w.episode_start for w in windows]),
    }


def window_iter(episodes, spec: MorphologySpec, t_w: int, batch_size: int,
                shuffle_seed: int):
    """Shuffled batches (lists) of windows drawn from all episodes."""
    pool = []
    for ep in episodes:
        pool.extend(episode_windows(ep, spec, t_w))
    order = np.random.default_rng(shuffle_seed).permutation(len(pool))
    for i in range(0, len(order), batch_size):
        yield [pool[j] for j in order[i:i + batch_size]]


def validation_split(episodes, fraction: float = 0.05, seed: int = 0):
    """Episode-level (train, validation) split, deterministic per seed."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n = len(episodes)
    k = int(round(n * fraction))
    if k == 0 or k == n:
        raise ValueError(f"{n} episodes cannot give a nonempty {fraction:.0%} split")
    picks = np.random.default_rng(seed).permutation(n)[:k]
    val_idx = set(int(i) for i in picks)
    train = [ep for i, ep in enumerate(episodes) if i not in val_idx]
    val = [ep for i, ep in enumerate(episodes) if i in val_idx]
    return train, val
