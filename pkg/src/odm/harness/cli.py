"""Command line front end: dataset generation, the two training phases
and checkpoint evaluation.

Every command materialises a run directory holding the resolved
configuration, an append-only metrics CSV, rendered figures and any
checkpoints, so a result can be audited or regenerated from the
directory alone. Datasets live outside run directories (under
--data-dir) because they are shared inputs addressed by path.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from datetime import datetime
from pathlib import Path

from ..datasets import read_episodes
from ..datasets.manifest import generate_dataset
from ..environments import make_env
from ..model.network import OdmModel
from ..training import (CurriculumPlan, evaluate_policy, evaluate_random,
                        run_curriculum, run_finetune, run_mixed)
from . import plots
from .checkpoint import load_model, save_model
from .config import TERRAIN_SUFFIX, RunConfig, load_config, save_config
from .metrics import MetricsWriter

REPORT_COLUMNS = ("env", "method", "mean_return", "std_return",
                  "mean_length", "std_length", "mean_distance", "episodes")


class RunLog:
    """Tee of human-readable progress lines to stdout and run.log."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._t0 = time.perf_counter()

    def __call__(self, msg: str) -> None:
        line = f"[{time.perf_counter() - self._t0:8.1f}s] {msg}"
        print(line)
        self._fh.write(line + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def make_run_dir(cfg: RunConfig) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    base = Path(cfg.out_dir) / f"{stamp}-{cfg.command}-s{cfg.seed}"
    path, k = base, 1
    while path.exists():
        k += 1
        path = base.with_name(f"{base.name}-{k}")
    path.mkdir(parents=True)
    return path


def _strip_terrain(env_name: str) -> str:
    for suffix in TERRAIN_SUFFIX.values():
        if suffix and env_name.endswith(suffix):
            return env_name[:-len(suffix)]
    return env_name


def resolve_task(model: OdmModel, env_name: str,
                 fresh_task: bool = False) -> str:
    """Map an environment onto one of the checkpoint's task modules.

    Exact name wins; otherwise a terrain variant reuses its base body's
    module when the morphology agrees (the zero-shot transfer path); a
    fresh module is registered only on request.
    """
    if env_name in model.specs:
        return env_name
    base = _strip_terrain(env_name)
    if base in model.specs:
        have, want = model.specs[base], make_env(env_name).spec
        if (have.K, have.n, have.m, have.x) == (want.K, want.n, want.m,
                                                want.x):
            return base
    if fresh_task:
        model.register_task(make_env(env_name).spec)
        return env_name
    raise KeyError(
        f"checkpoint has no task module for '{env_name}' "
        f"(available: {', '.join(model.specs) or 'none'}; "
        f"pass --fresh-task to add one)")


def load_task_datasets(cfg: RunConfig, tasks, log) -> dict:
    """(task, tier) -> episodes for every file present under data_dir.

    A task with no dataset at any tier is an error; individual missing
    tiers are tolerated (the curriculum skips them with a warning).
    """
    data_dir = Path(cfg.data_dir)
    datasets = {}
    for task in tasks:
        found = 0
        for tier in cfg.tier_rotation:
            path = data_dir / f"{task}-{tier}.jsonl"
            if path.exists():
                datasets[(task, tier)] = read_episodes(path)
                found += 1
        if not found:
            raise FileNotFoundError(
                f"no demonstration data for '{task}' under {data_dir} "
                f"(run gen-data first)")
        log(f"{task}: {found} tier file(s) loaded")
    return datasets


# ---------------------------------------------------------------- commands

def cmd_gen_data(cfg: RunConfig) -> int:
    pairs = [(env, tier) for env in cfg.envs for tier in cfg.tiers]
    if cfg.dry_run:
        for env, tier in pairs:
            print(f"would write {Path(cfg.data_dir) / f'{env}-{tier}.jsonl'} "
                  f"({cfg.episodes_per_tier} episodes, "
                  f"max {cfg.max_steps} steps, seed {cfg.seed})")
        return 0
    run_dir = make_run_dir(cfg)
    save_config(run_dir / "config.resolved", cfg)
    log = RunLog(run_dir / "run.log")
    log(f"run directory: {run_dir}")
    for env, tier in pairs:
        path, manifest = generate_dataset(env, tier, cfg.episodes_per_tier,
                                          cfg.seed, cfg.data_dir,
                                          max_steps=cfg.max_steps)
        log(f"wrote {path}: {manifest.summary()}")
    log.close()
    return 0


def cmd_pretrain(cfg: RunConfig) -> int:
    if cfg.train.t_w != cfg.model.t_w:
        raise ValueError("train.t_w and model.t_w must agree")
    run_dir = make_run_dir(cfg)
    save_config(run_dir / "config.resolved", cfg)
    log = RunLog(run_dir / "run.log")
    log(f"run directory: {run_dir}")
    courses = list(cfg.curriculum)
    model = OdmModel(cfg.model, seed=cfg.seed)
    for env in courses:
        model.register_task(make_env(env).spec)
    datasets = load_task_datasets(cfg, courses, log)
    writer = MetricsWriter(run_dir / "metrics.csv", cfg.seed)

    def on_epoch(rec):
        writer.row("pretrain", rec["course"],
                   loss_total=rec["train_total"],
                   loss_imitation=rec["train_imitation"],
                   loss_prediction=rec["train_prediction"],
                   wall_seconds=rec["wall_seconds"])
        writer.row("pretrain-val", rec["course"],
                   loss_total=rec["val_total"],
                   loss_imitation=rec["val_imitation"],
                   loss_prediction=rec["val_prediction"])
        log(f"course {rec['course']} ({rec['task']}) epoch {rec['epoch']} "
            f"[{rec['tier']}]: train {rec['train_total']:.5f} "
            f"val {rec['val_total']:.5f}")

    if cfg.no_curriculum:
        log("course mixing enabled (no curriculum ordering)")
        # one mixed epoch sweeps every (task, tier) group, where a
        # curriculum epoch visits a single tier of one course; divide so
        # the ablation spends the same optimizer-step budget
        epochs = max(1, cfg.epochs_per_course // max(1, len(cfg.tiers)))
        _, warnings = run_mixed(
            model, courses, datasets, cfg.train,
            epochs=epochs, seed=cfg.seed,
            batch_size=cfg.batch_size, use_prompt=not cfg.no_prompt,
            on_epoch=on_epoch)
    else:
        plan = CurriculumPlan(courses, list(cfg.tier_rotation),
                              cfg.epochs_per_course)
        _, warnings = run_curriculum(
            model, plan, datasets, cfg.train, seed=cfg.seed,
            batch_size=cfg.batch_size, use_prompt=not cfg.no_prompt,
            on_epoch=on_epoch)
    for w in warnings:
        log(f"warning: {w}")
    writer.close()
    ckpt = save_model(run_dir / "checkpoint.odm", model)
    log(f"checkpoint: {ckpt}")
    for p in plots.plot_pretrain(run_dir / "metrics.csv",
                                 run_dir / "plots"):
        log(f"figure: {p}")
    log.close()
    return 0


def cmd_finetune(cfg: RunConfig) -> int:
    if cfg.from_scratch and cfg.checkpoint:
        raise ValueError("--from-scratch contradicts --checkpoint")
    env_name = cfg.finetune_env
    run_dir = make_run_dir(cfg)
    save_config(run_dir / "config.resolved", cfg)
    log = RunLog(run_dir / "run.log")
    log(f"run directory: {run_dir}")
    log(f"environment: {env_name}")

    if cfg.from_scratch or cfg.no_pretrain or not cfg.checkpoint:
        model = OdmModel(cfg.model, seed=cfg.seed)
        model.register_task(make_env(env_name).spec)
        task = env_name
        log("fresh model (no pretrained checkpoint)")
    else:
        model = load_model(cfg.checkpoint)
        task = resolve_task(model, env_name, cfg.fresh_task)
        log(f"checkpoint {cfg.checkpoint} -> task module '{task}'")
    if cfg.train.t_w != model.cfg.t_w:
        raise ValueError("train.t_w disagrees with the model's horizon")
    model.activate(task)

    train_cfg, iterations = cfg.train, cfg.iterations
    if cfg.no_finetune:
        iterations = 0
        log("no-finetune: evaluating the loaded policy only")
    elif cfg.few_shot:
        per_actor = max(1, cfg.few_shot_steps // train_cfg.n_actors)
        t_max = min(train_cfg.t_max, per_actor)
        train_cfg = train_cfg.replace(t_max=t_max)
        iterations = max(1, cfg.few_shot_steps
                         // (train_cfg.n_actors * t_max))
        log(f"few-shot budget {cfg.few_shot_steps} steps: "
            f"{iterations} iteration(s) x {train_cfg.n_actors} actors "
            f"x {t_max} steps")

    writer = MetricsWriter(run_dir / "metrics.csv", cfg.seed)
    curve_fh = open(run_dir / "return_curve.csv", "w", newline="")
    curve = csv.writer(curve_fh)
    curve.writerow(("iteration", "mean_return", "std_return",
                    "mean_length", "std_length"))
    curve_fh.flush()

    def on_iteration(rec):
        writer.row("finetune", rec["iteration"],
                   loss_total=rec["loss_total"],
                   loss_actor=rec["loss_actor"],
                   loss_critic=rec["loss_critic"],
                   loss_imitation=rec["loss_imitation"],
                   loss_prediction=rec["loss_prediction"],
                   mean_return=rec["mean_return"],
                   mean_length=rec["mean_length"],
                   wall_seconds=rec["wall_seconds"])
        curve.writerow(("%d" % rec["iteration"],
                        "%.17g" % rec["mean_return"],
                        "%.17g" % rec["std_return"],
                        "%.17g" % rec["mean_length"],
                        "%.17g" % rec["std_length"]))
        curve_fh.flush()
        if rec["iteration"] % 10 == 0 or rec["iteration"] < 3:
            log(f"iteration {rec['iteration']}: "
                f"return {rec['mean_return']:.3f} "
                f"actor {rec['loss_actor']:.4f} "
                f"critic {rec['loss_critic']:.4f}")

    def factory(name=env_name, steps=cfg.max_steps):
        return make_env(name, max_steps=steps)

    run_finetune(model, factory, task, train_cfg, iterations,
                 seed=cfg.seed, use_prompt=not cfg.no_prompt,
                 on_iteration=on_iteration)
    stats = evaluate_policy(factory, model, task, cfg.train,
                            episodes=cfg.eval_episodes, seed=cfg.seed,
                            use_prompt=not cfg.no_prompt)
    writer.row("eval", iterations, mean_return=stats.mean_return,
               mean_length=stats.mean_length)
    log(f"final deterministic eval: {stats.summary()}")
    writer.close()
    curve_fh.close()
    ckpt = save_model(run_dir / "checkpoint.odm", model)
    log(f"checkpoint: {ckpt}")
    for p in plots.plot_finetune(run_dir / "metrics.csv",
                                 run_dir / "plots"):
        log(f"figure: {p}")
    log.close()
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    if not cfg.checkpoint:
        raise FileNotFoundError("eval needs --checkpoint")
    run_dir = make_run_dir(cfg)
    save_config(run_dir / "config.resolved", cfg)
    log = RunLog(run_dir / "run.log")
    log(f"run directory: {run_dir}")
    model = load_model(cfg.checkpoint)
    env_names = [env + TERRAIN_SUFFIX[cfg.terrain] for env in cfg.envs]
    rows = []
    for env_name in env_names:
        task = resolve_task(model, env_name, cfg.fresh_task)
        model.activate(task)

        def factory(name=env_name, steps=cfg.max_steps):
            return make_env(name, max_steps=steps)

        policy = evaluate_policy(factory, model, task, cfg.train,
                                 episodes=cfg.eval_episodes, seed=cfg.seed,
                                 use_prompt=not cfg.no_prompt)
        random = evaluate_random(factory, episodes=cfg.eval_episodes,
                                 seed=cfg.seed)
        rows.append((env_name, "policy", policy))
        rows.append((env_name, "random", random))
        log(f"{env_name} [task '{task}'] policy: {policy.summary()}")
        log(f"{env_name} random baseline: {random.summary()}")

    report_path = run_dir / "report.csv"
    with open(report_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(REPORT_COLUMNS)
        for env_name, method, s in rows:
            w.writerow((env_name, method, "%.17g" % s.mean_return,
                        "%.17g" % s.std_return, "%.17g" % s.mean_length,
                        "%.17g" % s.std_length, "%.17g" % s.mean_distance,
                        "%d" % s.episodes))
    print(f"{'env':<16}{'method':<10}{'return':<18}{'length':<18}distance")
    for env_name, method, s in rows:
        print(f"{env_name:<16}{method:<10}"
              f"{f'{s.mean_return:.2f}±{s.std_return:.2f}':<18}"
              f"{f'{s.mean_length:.1f}±{s.std_length:.1f}':<18}"
              f"{s.mean_distance:.3f}")
    for p in plots.plot_eval(report_path, run_dir / "plots"):
        log(f"figure: {p}")
    log.close()
    return 0


# ------------------------------------------------------------- arg parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="", metavar="PATH",
                   help="INI file with [run]/[train]/[model] sections")
    p.add_argument("--seed", type=int, default=None, metavar="N")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="parent directory for run directories")
    p.add_argument("--data-dir", default=None, metavar="DIR")
    p.add_argument("--max-steps", type=int, default=None, metavar="N",
                   help="environment episode length")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="odm",
        description="Morphology-aware policy training on chain bodies")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data",
                       help="roll out pioneer tiers into episode files")
    _add_common(g)
    g.add_argument("--envs", default=None,
                   help="comma-separated environment names")
    g.add_argument("--tiers", default=None,
                   help="comma-separated tier names")
    g.add_argument("--episodes", type=int, default=None,
                   help="episodes per (env, tier) file")
    g.add_argument("--dry-run", action="store_true",
                   help="print the plan without writing")

    p = sub.add_parser("pretrain",
                       help="curriculum imitation over demonstration tiers")
    _add_common(p)
    p.add_argument("--envs", default=None,
                   help="course order, easiest body first")
    p.add_argument("--tiers", default=None,
                   help="tier rotation within each course")
    p.add_argument("--epochs", type=int, default=None,
                   help="epochs per course")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--no-curriculum", action="store_true",
                   help="mix all bodies instead of ordered courses")
    p.add_argument("--no-prompt", action="store_true",
                   help="drop the morphology prompt pathway")

    f = sub.add_parser("finetune", help="on-policy PPO from a checkpoint")
    _add_common(f)
    f.add_argument("--checkpoint", default=None, metavar="PATH")
    f.add_argument("--env", dest="target_env", default=None,
                   help="target body, e.g. chain-4")
    f.add_argument("--terrain", choices=sorted(TERRAIN_SUFFIX),
                   default=None)
    f.add_argument("--iterations", type=int, default=None)
    f.add_argument("--few-shot", action="store_true",
                   help="cap total environment steps")
    f.add_argument("--few-shot-steps", type=int, default=None)
    f.add_argument("--from-scratch", action="store_true",
                   help="random initialisation instead of a checkpoint")
    f.add_argument("--no-pretrain", action="store_true",
                   help="synonym for --from-scratch")
    f.add_argument("--no-finetune", action="store_true",
                   help="skip updates; evaluate the checkpoint as loaded")
    f.add_argument("--fresh-task", action="store_true",
                   help="register a new task module for an unseen body")
    f.add_argument("--no-prompt", action="store_true")
    f.add_argument("--eval-episodes", type=int, default=None)

    e = sub.add_parser("eval", help="evaluate a checkpoint against random")
    _add_common(e)
    e.add_argument("--checkpoint", default=None, metavar="PATH")
    e.add_argument("--envs", default=None,
                   help="comma-separated environment names")
    e.add_argument("--terrain", choices=sorted(TERRAIN_SUFFIX),
                   default=None)
    e.add_argument("--eval-episodes", type=int, default=None)
    e.add_argument("--fresh-task", action="store_true")
    e.add_argument("--no-prompt", action="store_true")
    return ap


_FLAGS = ("no_pretrain", "no_finetune", "no_curriculum", "no_prompt",
          "few_shot", "from_scratch", "fresh_task", "dry_run")
_RENAMES = {"out": "out_dir", "episodes": "episodes_per_tier",
            "epochs": "epochs_per_course"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.command = args.command
    envs_overridden = False
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if key in _FLAGS:
            if value:
                setattr(cfg, key, True)
            continue
        name = _RENAMES.get(key, key)
        if key in ("envs", "tiers"):
            value = tuple(v.strip() for v in value.split(",") if v.strip())
            envs_overridden |= key == "envs"
            if key == "tiers":
                cfg.tier_rotation = value
        setattr(cfg, name, value)
    if envs_overridden:
        cfg.curriculum = ()   # rederived from the new env list below
    cfg.__post_init__()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        handler = {"gen-data": cmd_gen_data, "pretrain": cmd_pretrain,
                   "finetune": cmd_finetune, "eval": cmd_eval}[args.command]
        return handler(cfg)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
