"""Returns, TD residuals and generalized advantage estimation.

All computations here are plain numpy on recorded rollouts; nothing is
differentiated (advantages and value targets enter the losses as
constants).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdvantageBatch:
    advantages: np.ndarray     # (T,) GAE estimates
    value_targets: np.ndarray  # (T,) r_t + gamma * V_old(s_{t+1})
    old_values: np.ndarray     # (T,) V_old(s_t)
    old_logp: np.ndarray = field(default=None)

    def __post_init__(self):
        T = self.advantages.shape[0]
        if self.value_targets.shape[0] != T or self.old_values.shape[0] != T:
            raise ValueError("advantage batch arrays disagree in length")
        if self.old_logp is None:
            self.old_logp = np.zeros(T)


def discounted_return(rewards, gamma: float) -> float:
    """R = sum_t gamma^t r_t."""
    r = np.asarray(rewards, float)
    return float(np.sum(r * gamma ** np.arange(r.shape[0])))


def gae_advantages(rewards, values, done: bool, gamma: float,
                   lam: float, old_logp=None) -> AdvantageBatch:
    """Backward-recursion GAE over one episode.

    `values` holds V(s_0..s_T), one more entry than `rewards`; the trailing
    bootstrap V(s_T) is forced to 0 when the episode terminated.
    """
    r = np.asarray(rewards, float)
    v = np.asarray(values, float).copy()
    T = r.shape[0]
    if v.shape[0] != T + 1:
        raise ValueError(f"need {T + 1} values for {T} rewards, got {v.shape[0]}")
    if done:
        v[T] = 0.0
    delta = r + gamma * v[1:] - v[:-1]
    adv = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = delta[t] + gamma * lam * acc
        adv[t] = acc
    return AdvantageBatch(advantages=adv, value_targets=r + gamma * v[1:],
                          old_values=v[:-1], old_logp=old_logp)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Shift/scale to mean 0, std 1 (std floor keeps constants finite)."""
    a = np.asarray(adv, float)
    return (a - a.mean()) / max(float(a.std()), 1e-8)
