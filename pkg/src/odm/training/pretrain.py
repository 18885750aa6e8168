"""Phase one: curriculum imitation pretraining over demonstration tiers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..datasets import stack_windows, validation_split, window_iter
from ..numerics import Tape
from .config import TrainConfig
from .losses import imitation_loss, prediction_loss, pretrain_loss


def freeze_control_head(model, task: str) -> None:
    """Value head and policy spread stay untouched until finetuning."""
    model.store.freeze(f"task.{task}.proj_v")
    model.store.freeze(f"task.{task}.log_std")


def unfreeze_control_head(model, task: str) -> None:
    model.store.unfreeze(f"task.{task}.proj_v")
    model.store.unfreeze(f"task.{task}.log_std")


def _batch_losses(model, batch, task: str, cfg: TrainConfig,
                  use_prompt: bool):
    b = stack_windows(batch)
    a_hat, s_hat, _ = model.forward_batch(
        b["states"], b["actions"], b["timesteps"], b["n_pad"], task,
        use_prompt=use_prompt)
    am, ps, _, _ = model.project_heads(a_hat, s_hat, task)
    valid = b["valid"][:, :, None]
    imit = imitation_loss(am, b["actions"], valid)
    pred = prediction_loss(ps, b["states"], valid,
                           episode_start=b["episode_start"], n_pad=b["n_pad"])
    return pretrain_loss(imit, pred, cfg), imit, pred


def pretrain_step(model, batch, task: str, cfg: TrainConfig, lr: float = None,
                  use_prompt: bool = True):
    """One Adam step on L = eta_i * imitation + eta_p * prediction.

    `batch` is a list of TrajectoryWindow for the active task. Returns
    (total, imitation, prediction) as floats.
    """
    if model.active_task != task:
        raise ValueError(f"task '{task}' is not active")
    freeze_control_head(model, task)
    # the prompt row gets no gradient when skipped, so it must be frozen
    # or the optimizer's coverage check trips; thaw it again when in use
    if use_prompt:
        model.store.unfreeze("shared.prompt")
    else:
        model.store.freeze("shared.prompt")
    with Tape() as tape:
        total, imit, pred = _batch_losses(model, batch, task, cfg, use_prompt)
    grads = model.store.collect_grads(tape, total)
    model.store.adam_step(grads, cfg.lr_pretrain if lr is None else lr,
                          weight_decay=cfg.weight_decay)
    return float(total.data), float(imit.data), float(pred.data)


def evaluate_pretrain(model, episodes, task: str, cfg: TrainConfig,
                      use_prompt: bool = True, batch_size: int = 64):
    """Held-out pretrain losses, no parameter updates. Floats (total, i, p)."""
    tot = np.zeros(3)
    n = 0
    for batch in window_iter(episodes, model.spec(task), cfg.t_w,
                             batch_size, shuffle_seed=0):
        total, imit, pred = _batch_losses(model, batch, task, cfg, use_prompt)
        w = len(batch)
        tot += w * np.array([float(total.data), float(imit.data),
                             float(pred.data)])
        n += w
    if n == 0:
        raise ValueError("no evaluation windows")
    return tuple(tot / n)


@dataclass
class CurriculumPlan:
    """Course order (easiest body first) and the tier rotation per epoch."""
    tasks: list
    tiers: list
    epochs_per_course: int

    def __post_init__(self):
        if not self.tasks or not self.tiers or self.epochs_per_course < 1:
            raise ValueError("plan needs tasks, tiers and >= 1 epoch")


def run_curriculum(model, plan: CurriculumPlan, datasets: dict,
                   cfg: TrainConfig, seed: int = 0, batch_size: int = 32,
                   use_prompt: bool = True, on_epoch=None):
    """Train through the plan's courses in order, rotating pioneer tiers.

    `datasets` maps (task, tier) -> list of EpisodeRecord. Within a course
    one tier is visited per epoch; a missing (task, tier) dataset skips
    the epoch with a recorded warning. Returns (history, warnings) where
    history holds one record per epoch including held-out validation MSE.
    """
    for task in plan.tasks:
        if task not in model.specs:
            raise KeyError(f"task '{task}' is not registered")
    if not use_prompt:
        model.store.freeze("shared.prompt")
    history, warnings = [], []
    for course, task in enumerate(plan.tasks):
        model.activate(task)
        freeze_control_head(model, task)
        spec = model.spec(task)
        splits, val_pool = {}, []
        for tier in plan.tiers:
            eps = datasets.get((task, tier))
            if eps:
                tr, va = validation_split(eps, cfg.validation_fraction,
                                          seed=seed + course)
                splits[tier] = tr
                val_pool.extend(va)
        for epoch in range(plan.epochs_per_course):
            tier = plan.tiers[epoch % len(plan.tiers)]
            t0 = time.perf_counter()
            if tier not in splits:
                warnings.append(f"course {course} ({task}): no '{tier}' "
                                f"dataset, epoch {epoch} skipped")
                continue
            sums, n = np.zeros(3), 0
            shuffle = seed * 100003 + course * 1009 + epoch
            for batch in window_iter(splits[tier], spec, cfg.t_w,
                                     batch_size, shuffle_seed=shuffle):
                total, imit, pred = pretrain_step(model, batch, task, cfg,
                                                  use_prompt=use_prompt)
                sums += len(batch) * np.array([total, imit, pred])
                n += len(batch)
            val = evaluate_pretrain(model, val_pool, task, cfg, use_prompt)
            rec = {
                "phase": "pretrain", "course": course, "task": task,
                "epoch": epoch, "tier": tier,
                "train_total": sums[0] / n, "train_imitation": sums[1] / n,
                "train_prediction": sums[2] / n,
                "val_total": val[0], "val_imitation": val[1],
                "val_prediction": val[2],
                "wall_seconds": time.perf_counter() - t0,
            }
            history.append(rec)
            if on_epoch is not None:
                on_epoch(rec)
    return history, warnings


def run_mixed(model, tasks, datasets: dict, cfg: TrainConfig, epochs: int,
              seed: int = 0, batch_size: int = 32, use_prompt: bool = True,
              on_epoch=None):
    """Curriculum ablation: all bodies and tiers shuffled together.

    Every epoch visits the union of all (task, tier) windows in one seeded
    shuffle of single-task batches, activating each batch's task on the
    fly. History matches run_curriculum's schema with tier 'mixed' and a
    record per (epoch, task).
    """
    for task in tasks:
        if task not in model.specs:
            raise KeyError(f"task '{task}' is not registered")
    if not use_prompt:
        model.store.freeze("shared.prompt")
    train_pool, val_pool = {t: [] for t in tasks}, {t: [] for t in tasks}
    for (task, _tier), eps in sorted(datasets.items()):
        if task not in train_pool or not eps:
            continue
        tr, va = validation_split(eps, cfg.validation_fraction, seed=seed)
        train_pool[task].extend(tr)
        val_pool[task].extend(va)
    history = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 29]))
    for epoch in range(epochs):
        t0 = time.perf_counter()
        batches = []
        for ti, task in enumerate(tasks):
            spec = model.spec(task)
            shuffle = seed * 100003 + epoch * 31 + ti * 1009
            for b in window_iter(train_pool[task], spec, cfg.t_w,
                                 batch_size, shuffle_seed=shuffle):
                batches.append((task, b))
        order = rng.permutation(len(batches))
        sums = {t: np.zeros(4) for t in tasks}
        for j in order:
            task, batch = batches[j]
            model.activate(task)
            total, imit, pred = pretrain_step(model, batch, task, cfg,
                                              use_prompt=use_prompt)
            sums[task] += [len(batch) * total, len(batch) * imit,
                           len(batch) * pred, len(batch)]
        wall = time.perf_counter() - t0
        for task in tasks:
            model.activate(task)
            val = evaluate_pretrain(model, val_pool[task], task, cfg,
                                    use_prompt)
            s = sums[task]
            rec = {
                "phase": "pretrain", "course": 0, "task": task,
                "epoch": epoch, "tier": "mixed",
                "train_total": s[0] / s[3], "train_imitation": s[1] / s[3],
                "train_prediction": s[2] / s[3],
                "val_total": val[0], "val_imitation": val[1],
                "val_prediction": val[2], "wall_seconds": wall,
            }
            history.append(rec)
            if on_epoch is not None:
                on_epoch(rec)
    return history, []
