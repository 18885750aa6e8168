"""Phase two: PPO finetuning with a small self-supervised auxiliary term."""

from __future__ import annotations

import time

import numpy as np

from ..numerics import Tape, reshape
from .advantage import gae_advantages
from .config import TrainConfig
from .losses import (actor_surrogate, critic_loss, gaussian_logp,
                     imitation_loss, prediction_loss, ppo_loss, pretrain_loss)
from .pretrain import unfreeze_control_head
from .rollout import _logp_gaussian, collect_rollouts


def _lpad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.concatenate([np.zeros((pad,) + x.shape[1:], x.dtype), x])


def rollout_buffer(rollouts, cfg: TrainConfig) -> dict:
    """Window-sliced training buffer with per-episode GAE.

    Advantages are normalized across the whole buffer (mean 0, std 1) and
    stored alongside fixed value targets, old log-probs and old means.
    """
    batches = [gae_advantages(r.rewards, r.values, r.done, cfg.gamma,
                              cfg.lam, old_logp=r.logp) for r in rollouts]
    flat = np.concatenate([b.advantages for b in batches])
    mu, sd = float(flat.mean()), max(float(flat.std()), 1e-8)

    cols = {k: [] for k in ("states", "actions", "timesteps", "n_pad",
                            "episode_start", "valid", "adv", "vtarg",
                            "old_logp", "old_mean")}
    for r, b in zip(rollouts, batches):
        adv = (b.advantages - mu) / sd
        T = r.length
        for start in range(0, T, cfg.t_w):
            stop = min(start + cfg.t_w, T)
            pad = cfg.t_w - (stop - start)
            sl = slice(start, stop)
            cols["states"].append(_lpad(r.states[sl], pad))
            cols["actions"].append(_lpad(r.actions[sl], pad))
            cols["timesteps"].append(_lpad(np.arange(start, stop), pad))
            cols["n_pad"].append(pad)
            cols["episode_start"].append(start == 0)
            cols["valid"].append(_lpad(np.ones(stop - start, bool), pad))
            cols["adv"].append(_lpad(adv[sl], pad))
            cols["vtarg"].append(_lpad(b.value_targets[sl], pad))
            cols["old_logp"].append(_lpad(b.old_logp[sl], pad))
            cols["old_mean"].append(_lpad(r.means[sl], pad))
    buf = {k: np.array(v) for k, v in cols.items()}
    buf["old_log_std"] = rollouts[0].log_std
    return buf


def refresh_anchor(model, buf: dict, task: str, cfg: TrainConfig,
                   use_prompt: bool = True, chunk: int = 64) -> None:
    """Rewrite old_mean/old_logp under the buffer's own window layout.

    Rollout-time statistics condition on trailing windows; the buffer
    re-evaluates actions on start-aligned windows whose early rows carry
    less context. Anchoring the ratios and the KL to the rollout stats
    would therefore start every epoch far from 1. Recomputing the anchor
    teacher-forced, in the training layout, makes ratio == 1 and KL == 0
    exact at the first minibatch.
    """
    means, logps = [], []
    for i in range(0, buf["states"].shape[0], chunk):
        sl = slice(i, i + chunk)
        a_hat, s_hat, _ = model.forward_batch(
            buf["states"][sl], buf["actions"][sl], buf["timesteps"][sl],
            buf["n_pad"][sl], task, use_prompt=use_prompt)
        am, _, _, ls = model.project_heads(a_hat, s_hat, task)
        means.append(am.data.copy())
        logps.append(_logp_gaussian(buf["actions"][sl], am.data, ls.data))
    buf["old_mean"] = np.concatenate(means)
    buf["old_logp"] = np.concatenate(logps)


def finetune_iteration(model, rollouts, task: str, cfg: TrainConfig,
                       lr: float = None, seed: int = 0,
                       use_prompt: bool = True) -> dict:
    """Minibatch PPO epochs over one rollout buffer.

    Minimizes eta_1 * (-|eta_a| surrogate + eta_c critic) + eta_2 * pretrain
    terms computed against the rollout's own states/actions. Returns mean
    losses over all minibatch steps plus buffer statistics.
    """
    if not rollouts:
        raise ValueError("empty rollout buffer")
    if model.active_task != task:
        raise ValueError(f"task '{task}' is not active")
    unfreeze_control_head(model, task)
    # prompt row only receives gradient when attended; keep freeze state
    # in step with usage so the optimizer's coverage check stays exact
    if use_prompt:
        model.store.unfreeze("shared.prompt")
    else:
        model.store.freeze("shared.prompt")
    buf = rollout_buffer(rollouts, cfg)
    refresh_anchor(model, buf, task, cfg, use_prompt=use_prompt)
    W = buf["states"].shape[0]
    per_mb = max(1, cfg.minibatch_steps // cfg.t_w)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    step_lr = cfg.lr_finetune if lr is None else lr

    sums = np.zeros(5)
    n_mb = 0
    for _ in range(cfg.ppo_epochs):
        order = rng.permutation(W)
        for at in range(0, W, per_mb):
            idx = order[at:at + per_mb]
            valid = buf["valid"][idx]
            with Tape() as tape:
                a_hat, s_hat, _ = model.forward_batch(
                    buf["states"][idx], buf["actions"][idx],
                    buf["timesteps"][idx], buf["n_pad"][idx], task,
                    use_prompt=use_prompt)
                am, ps, val, ls = model.project_heads(a_hat, s_hat, task)
                new_logp = gaussian_logp(buf["actions"][idx], am, ls)
                surr = actor_surrogate(
                    new_logp, buf["old_logp"][idx], buf["adv"][idx],
                    new_dist=(am, ls),
                    old_dist=(buf["old_mean"][idx], buf["old_log_std"]),
                    eps=cfg.clip_eps, beta=cfg.kl_beta, mask=valid)
                crit = critic_loss(reshape(val, valid.shape),
                                   buf["vtarg"][idx], mask=valid)
                ppo = ppo_loss(surr, crit, cfg)
                imit = imitation_loss(am, buf["actions"][idx],
                                      valid[:, :, None])
                pred = prediction_loss(ps, buf["states"][idx],
                                       valid[:, :, None],
                                       episode_start=buf["episode_start"][idx],
                                       n_pad=buf["n_pad"][idx])
                total = ppo * cfg.eta_1 + pretrain_loss(imit, pred, cfg) * cfg.eta_2
            grads = model.store.collect_grads(tape, total)
            model.store.adam_step(grads, step_lr,
                                  weight_decay=cfg.weight_decay)
            sums += [float(total.data), float(surr.data), float(crit.data),
                     float(imit.data), float(pred.data)]
            n_mb += 1

    rets = np.array([r.episode_return for r in rollouts])
    lens = np.array([r.length for r in rollouts], float)
    return {
        "loss_total": sums[0] / n_mb, "loss_actor": sums[1] / n_mb,
        "loss_critic": sums[2] / n_mb, "loss_imitation": sums[3] / n_mb,
        "loss_prediction": sums[4] / n_mb,
        "mean_return": float(rets.mean()), "std_return": float(rets.std()),
        "mean_length": float(lens.mean()), "std_length": float(lens.std()),
        "n_windows": int(W),
    }


def run_finetune(model, env_factory, task: str, cfg: TrainConfig,
                 iterations: int, seed: int = 0, lr: float = None,
                 use_prompt: bool = True, plateau_window: int = None,
                 plateau_patience: int = 300, plateau_tol: float = 0.01,
                 on_iteration=None) -> list:
    """Collect-update loop with a fixed budget and optional plateau stop.

    Plateau detection (off unless plateau_window is set): stop once the
    `plateau_window`-iteration mean return has not improved on its best
    value by more than `plateau_tol` for `plateau_patience` iterations.
    """
    history = []
    iter_seeds = np.random.default_rng(
        np.random.SeedSequence([seed, 19])).integers(0, 2 ** 62,
                                                     size=max(iterations, 1))
    best, best_at = -np.inf, 0
    for it in range(iterations):
        t0 = time.perf_counter()
        rollouts = collect_rollouts(env_factory, model, task, cfg,
                                    seed=int(iter_seeds[it]),
                                    use_prompt=use_prompt)
        rec = finetune_iteration(model, rollouts, task, cfg, lr=lr,
                                 seed=int(iter_seeds[it]),
                                 use_prompt=use_prompt)
        rec["phase"] = "finetune"
        rec["iteration"] = it
        rec["wall_seconds"] = time.perf_counter() - t0
        history.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        if plateau_window and len(history) >= plateau_window:
            recent = np.mean([h["mean_return"]
                              for h in history[-plateau_window:]])
            if recent > best + plateau_tol * max(abs(best), 1.0):
                best, best_at = recent, it
            elif it - best_at >= plateau_patience:
                break
    return history
