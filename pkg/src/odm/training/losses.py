"""Differentiable loss terms for pretraining and PPO finetuning.

Predictions arrive as Tensors on the active tape; targets, advantages and
masks are plain numpy constants. Masks are boolean arrays broadcastable
to the prediction shape; False entries are excluded from every mean.
"""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, clip, exp, mean, minimum, square, sum_

LOG_2PI = float(np.log(2.0 * np.pi))


def _masked_mean(x, mask):
    """Mean of `x` over the True entries of `mask` (0 when none)."""
    m = np.broadcast_to(np.asarray(mask, bool), x.shape)
    n = int(m.sum())
    if n == 0:
        return Tensor(np.zeros(()))
    return sum_(x * m.astype(float)) * (1.0 / n)


def gaussian_logp(actions, mean_t, log_std):
    """Diagonal Gaussian log density summed over the trailing action axis.

    `actions` (..., n_a) constants, `mean_t` matching Tensor, `log_std`
    Tensor of shape (n_a,). Returns shape (...,).
    """
    n_a = np.asarray(actions).shape[-1]
    d = mean_t - np.asarray(actions, float)
    quad = sum_(square(d) * exp(log_std * (-2.0)), axis=-1)
    return quad * (-0.5) - sum_(log_std) - 0.5 * n_a * LOG_2PI


def kl_diag_gaussian(old_mean, old_log_std, new_mean, new_log_std):
    """KL(old || new) per step for diagonal Gaussians; old side constant."""
    om = np.asarray(old_mean, float)
    ols = np.asarray(old_log_std, float)
    var_old = np.exp(2.0 * ols)
    inv_var_new = exp(new_log_std * (-2.0))
    gap = (square(new_mean - om) + var_old) * inv_var_new * 0.5
    return sum_(new_log_std - ols + gap - 0.5, axis=-1)


def critic_loss(values_new, value_targets, mask=None):
    """MSE between V(s_t) and the fixed r_t + gamma*V_old(s_{t+1}) targets."""
    sq = square(values_new - np.asarray(value_targets, float))
    if mask is None:
        return mean(sq)
    return _masked_mean(sq, mask)


def actor_surrogate(new_logp, old_logp, advantages, new_dist=None,
                    old_dist=None, eps: float = 0.1, beta: float = 0.1,
                    mask=None):
    """Clipped PPO surrogate minus beta * KL(old || new); to be maximized.

    Advantages must arrive detached and normalized. `new_dist`/`old_dist`
    are (mean, log_std) pairs for the KL penalty; omit to drop the term.
    """
    adv = np.asarray(advantages, float)
    ratio = exp(new_logp - np.asarray(old_logp, float))
    unclipped = ratio * adv
    clipped = clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    gain = minimum(unclipped, clipped)
    surr = mean(gain) if mask is None else _masked_mean(gain, mask)
    if beta != 0.0 and new_dist is not None and old_dist is not None:
        kl = kl_diag_gaussian(old_dist[0], old_dist[1], new_dist[0], new_dist[1])
        kl_mean = mean(kl) if mask is None else _masked_mean(kl, mask)
        surr = surr - beta * kl_mean
    return surr


def ppo_loss(actor_term, critic_term, cfg):
    """Minimized combination: -|eta_a| * surrogate + eta_c * critic MSE."""
    return actor_term * (-abs(cfg.eta_a)) + critic_term * cfg.eta_c


def imitation_loss(pred_actions, target_actions, mask):
    """Masked MSE between predicted and demonstrated actions."""
    m = np.broadcast_to(np.asarray(mask, bool), pred_actions.shape)
    if not m.any():
        raise ValueError("imitation mask selects no slots")
    sq = square(pred_actions - np.asarray(target_actions, float))
    return sum_(sq * m.astype(float)) * (1.0 / int(m.sum()))


def prediction_loss(pred_states, target_states, mask, episode_start=None,
                    n_pad=None):
    """Masked MSE between predicted and observed states.

    The very first state of an episode has no preceding context to predict
    it from, so for windows flagged as episode starts the first real row
    (index n_pad) is excluded. Degenerate windows contribute 0.
    """
    shape = pred_states.shape
    m = np.broadcast_to(np.asarray(mask, bool), shape).copy()
    if episode_start is not None:
        starts = np.asarray(episode_start, bool)
        B, T = shape[0], shape[1]
        pads = np.zeros(B, np.intp) if n_pad is None else np.asarray(n_pad, np.intp)
        rows = np.nonzero(starts)[0]
        m[rows, pads[rows]] = False
    sq = square(pred_states - np.asarray(target_states, float))
    n = int(m.sum())
    if n == 0:
        return Tensor(np.zeros(()))
    return sum_(sq * m.astype(float)) * (1.0 / n)


def pretrain_loss(imitation_term, prediction_term, cfg):
    """L = eta_i * imitation + eta_p * prediction."""
    return imitation_term * cfg.eta_i + prediction_term * cfg.eta_p
