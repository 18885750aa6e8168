"""Hyperparameters shared by curriculum pretraining and PPO finetuning."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class TrainConfig:
    gamma: float = 0.90          # discount
    lam: float = 0.1             # GAE decay
    clip_eps: float = 0.1        # PPO ratio clip
    kl_beta: float = 0.1         # KL penalty weight
    eta_a: float = -1.0          # actor coefficient as published; |eta_a| used
    eta_c: float = 0.1           # critic coefficient
    eta_i: float = 1.0           # imitation weight (pretrain)
    eta_p: float = 0.1           # prediction weight (pretrain)
    eta_1: float = 1.0           # PPO weight (finetune)
    eta_2: float = 1e-5          # pretrain-term weight (finetune)
    n_actors: int = 32           # parallel rollout actors
    t_max: int = 1000            # rollout horizon per actor
    t_w: int = 10                # context window length
    lr_pretrain: float = 1e-5
    lr_finetune: float = 5e-4
    weight_decay: float = 0.01
    ppo_epochs: int = 4          # passes over each rollout buffer
    minibatch_steps: int = 256   # steps per minibatch (window-aligned)
    validation_fraction: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be positive")
        if self.t_w < 1 or self.t_max < 1 or self.n_actors < 1:
            raise ValueError("t_w, t_max, n_actors must be >= 1")

    def replace(self, **kw) -> "TrainConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return TrainConfig(**vals)
