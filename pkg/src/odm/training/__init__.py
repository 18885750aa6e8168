from .advantage import (AdvantageBatch, discounted_return, gae_advantages,
                        normalize_advantages)
from .config import TrainConfig
from .finetune import (finetune_iteration, refresh_anchor, rollout_buffer,
                       run_finetune)
from .losses import (actor_surrogate, critic_loss, gaussian_logp,
                     imitation_loss, kl_diag_gaussian, ppo_loss,
                     prediction_loss, pretrain_loss)
from .pretrain import (CurriculumPlan, evaluate_pretrain,
                       freeze_control_head, pretrain_step, run_curriculum,
                       run_mixed, unfreeze_control_head)
from .rollout import (EvalStats, Rollout, collect_rollouts, evaluate_policy,
                      evaluate_random)

__all__ = [
    "AdvantageBatch", "discounted_return", "gae_advantages",
    "normalize_advantages",
    "TrainConfig",
    "finetune_iteration", "refresh_anchor", "rollout_buffer", "run_finetune",
    "actor_surrogate", "critic_loss", "gaussian_logp", "imitation_loss",
    "kl_diag_gaussian", "ppo_loss", "prediction_loss", "pretrain_loss",
    "CurriculumPlan", "evaluate_pretrain", "freeze_control_head",
    "pretrain_step", "run_curriculum", "run_mixed", "unfreeze_control_head",
    "EvalStats", "Rollout", "collect_rollouts", "evaluate_policy",
    "evaluate_random",
]
