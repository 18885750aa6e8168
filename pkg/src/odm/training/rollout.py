"""Policy rollouts and evaluation with trailing-window inference.

N actors step their environments in lockstep against a fixed policy
snapshot; every forward here runs without a tape. The policy conditions
on the trailing T_w steps of its own executed trajectory, the current
step entering with a zero placeholder action (the causal layout makes
the action prediction for step t independent of a_t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .losses import LOG_2PI


@dataclass
class Rollout:
    """One actor's episode with the quantities PPO needs later."""
    states: np.ndarray    # (T, n_s) compact observations s_0..s_{T-1}
    actions: np.ndarray   # (T, n_a) executed actions
    rewards: np.ndarray   # (T,)
    values: np.ndarray    # (T+1,) V(s_0..s_T), last entry the bootstrap
    logp: np.ndarray      # (T,) log pi_old(a_t | s_t)
    means: np.ndarray     # (T, n_a) policy mean at collection time
    log_std: np.ndarray   # (n_a,) policy log-std at collection time
    terminal_state: np.ndarray  # (n_s,) observation after the last step
    done: bool            # env terminated (GAE zeroes the bootstrap)
    env: str = ""

    @property
    def length(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


def _window_batch(model, task, S, A, t_w, use_prompt):
    """Block-aligned windows ending at each actor's latest observation.

    The window covers the current t_w-step block up to step t, matching
    the slicing used by pretraining and by the finetune buffer; acting on
    trailing (sliding) windows instead would query the network under
    contexts it is never trained on. S[i] holds observations (one more
    than A[i], whose current-step entry is still unknown). Returns
    (mean (B, n_a), value (B,), log_std (n_a,)).
    """
    spec = model.spec(task)
    B = len(S)
    sw = np.zeros((B, t_w, spec.n_s))
    aw = np.zeros((B, t_w, spec.n_a))
    tw = np.zeros((B, t_w), np.intp)
    n_pad = np.zeros(B, np.intp)
    for i in range(B):
        t = len(S[i]) - 1
        lo = (t // t_w) * t_w
        w = t - lo + 1
        sw[i, t_w - w:] = S[i][lo:]
        if w > 1:
            aw[i, t_w - w:-1] = A[i][lo:]
        tw[i, t_w - w:] = np.arange(lo, t + 1)
        n_pad[i] = t_w - w
    a_hat, s_hat, _ = model.forward_batch(sw, aw, tw, n_pad, task,
                                          use_prompt=use_prompt)
    am, _, val, ls = model.project_heads(a_hat, s_hat, task)
    return am.data[:, -1, :], val.data[:, -1, 0], ls.data


def _logp_gaussian(a, mu, log_std):
    quad = np.sum(((a - mu) * np.exp(-log_std)) ** 2, axis=-1)
    return -0.5 * quad - log_std.sum() - 0.5 * a.shape[-1] * LOG_2PI


def collect_rollouts(env_factory, model, task: str, cfg: TrainConfig,
                     seed: int, n_actors: int = None, t_max: int = None,
                     deterministic: bool = False,
                     use_prompt: bool = True) -> list:
    """Run N synchronized actors for up to t_max steps each.

    Deterministic per (seed, policy): env resets and action noise both
    derive from `seed`. Episodes end at env termination or the horizon,
    whichever first ('done' records which).
    """
    N = cfg.n_actors if n_actors is None else n_actors
    horizon = cfg.t_max if t_max is None else t_max
    envs = [env_factory() for _ in range(N)]
    reset_seeds = np.random.default_rng(
        np.random.SeedSequence([seed, 11])).integers(0, 2 ** 62, size=N)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))

    S = [[np.asarray(envs[i].reset(int(reset_seeds[i])), float)]
         for i in range(N)]
    A = [[] for _ in range(N)]
    rews = [[] for _ in range(N)]
    vals = [[] for _ in range(N)]
    lps = [[] for _ in range(N)]
    mus = [[] for _ in range(N)]
    finished = np.zeros(N, bool)
    done_flags = np.zeros(N, bool)

    for _ in range(horizon):
        if finished.all():
            break
        mu, v, ls = _window_batch(model, task, S, A, cfg.t_w, use_prompt)
        noise = rng.standard_normal(mu.shape)
        act = mu if deterministic else mu + np.exp(ls) * noise
        lp = _logp_gaussian(act, mu, ls)
        for i in range(N):
            if finished[i]:
                continue
            obs, r, done = envs[i].step(act[i])
            A[i].append(act[i])
            rews[i].append(r)
            vals[i].append(v[i])
            lps[i].append(lp[i])
            mus[i].append(mu[i])
            S[i].append(np.asarray(obs, float))
            if done:
                finished[i] = True
                done_flags[i] = True

    # bootstrap value of the observation after each episode's last step
    _, v_last, ls = _window_batch(model, task, S, A, cfg.t_w, use_prompt)
    out = []
    for i in range(N):
        out.append(Rollout(
            states=np.array(S[i][:-1]), actions=np.array(A[i]),
            rewards=np.array(rews[i]),
            values=np.append(np.array(vals[i]), v_last[i]),
            logp=np.array(lps[i]), means=np.array(mus[i]),
            log_std=ls.copy(), terminal_state=S[i][-1].copy(),
            done=bool(done_flags[i]), env=getattr(envs[i], "name", "")))
    return out


@dataclass
class EvalStats:
    mean_return: float
    std_return: float
    mean_length: float
    std_length: float
    mean_distance: float   # head displacement along x
    episodes: int

    def summary(self) -> str:
        return (f"return {self.mean_return:.2f}±{self.std_return:.2f} / "
                f"length {self.mean_length:.2f}±{self.std_length:.2f} "
                f"({self.episodes} episodes)")


def evaluate_policy(env_factory, model, task: str, cfg: TrainConfig,
                    episodes: int = 100, seed: int = 0,
                    deterministic: bool = True,
                    use_prompt: bool = True) -> EvalStats:
    """Deterministic-mean evaluation over independent episodes."""
    probe = env_factory()
    horizon = probe.cfg.max_steps
    rollouts = collect_rollouts(env_factory, model, task, cfg, seed,
                                n_actors=episodes, t_max=horizon,
                                deterministic=deterministic,
                                use_prompt=use_prompt)
    spec = model.spec(task)
    nj = spec.n_s - spec.x
    rets = np.array([r.episode_return for r in rollouts])
    lens = np.array([r.length for r in rollouts], float)
    dist = np.array([r.terminal_state[nj] - r.states[0, nj]
                     for r in rollouts])
    return EvalStats(float(rets.mean()), float(rets.std()),
                     float(lens.mean()), float(lens.std()),
                     float(dist.mean()), episodes)


def evaluate_random(env_factory, episodes: int = 100,
                    seed: int = 0) -> EvalStats:
    """Uniform-torque baseline over independent episodes."""
    rets, lens, dists = [], [], []
    for e in range(episodes):
        env = env_factory()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 23, e]))
        obs = env.reset(int(rng.integers(0, 2 ** 62)))
        nj = env.spec.n_s - env.spec.x
        x0 = obs[nj]
        lim = env.cfg.torque_limit
        total, steps, done = 0.0, 0, False
        while not done:
            obs, r, done = env.step(rng.uniform(-lim, lim, env.spec.n_a))
            total += r
            steps += 1
        rets.append(total)
        lens.append(steps)
        dists.append(obs[nj] - x0)
    rets, lens = np.array(rets), np.array(lens, float)
    return EvalStats(float(rets.mean()), float(rets.std()),
                     float(lens.mean()), float(lens.std()),
                     float(np.mean(dists)), episodes)
