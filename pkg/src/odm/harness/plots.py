"""Figures rendered from the run CSVs alone."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import read_metrics  # noqa: E402

_SAVE_KW = dict(metadata={"Date": None})  # keep SVG output reproducible


def _grab(rows, col):
    return [float(r[col]) for r in rows]


def plot_pretrain(metrics_csv, out_dir) -> list:
    """Train-loss and validation-MSE curves, one line per course/task."""
    rows = [r for r in read_metrics(metrics_csv) if r["phase"] == "pretrain"]
    val_rows = [r for r in read_metrics(metrics_csv)
                if r["phase"] == "pretrain-val"]
    if not rows:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(rows)), _grab(rows, "loss_total"), label="train total")
    ax.plot(range(len(rows)), _grab(rows, "loss_imitation"),
            label="train imitation")
    if val_rows:
        ax.plot(range(len(val_rows)), _grab(val_rows, "loss_imitation"),
                label="validation imitation", linestyle="--")
    for i, r in enumerate(rows[1:], start=1):
        if r["course_iteration"] != rows[i - 1]["course_iteration"]:
            ax.axvline(i - 0.5, color="gray", alpha=0.4, linewidth=0.8)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("pretraining losses (course switches marked)")
    fig.tight_layout()
    p = out_dir / "pretrain_loss.svg"
    fig.savefig(p, **_SAVE_KW)
    plt.close(fig)
    paths.append(p)
    return paths


def plot_finetune(metrics_csv, out_dir) -> list:
    rows = [r for r in read_metrics(metrics_csv) if r["phase"] == "finetune"]
    if not rows:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    it = _grab(rows, "course_iteration")
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(it, _grab(rows, "mean_return"))
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean rollout return")
    ax.set_title("finetuning return")
    fig.tight_layout()
    p = out_dir / "return_curve.svg"
    fig.savefig(p, **_SAVE_KW)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(7, 4))
    for col in ("loss_actor", "loss_critic", "loss_total"):
        ax.plot(it, _grab(rows, col), label=col)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend()
    ax.set_title("finetuning losses")
    fig.tight_layout()
    p = out_dir / "finetune_losses.svg"
    fig.savefig(p, **_SAVE_KW)
    plt.close(fig)
    paths.append(p)
    return paths


def plot_eval(report_csv, out_dir) -> list:
    """Grouped bars: mean return per environment and method."""
    import csv

    with open(report_csv, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    envs = sorted({r["env"] for r in rows})
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(1.5 + 1.6 * len(envs), 4))
    width = 0.8 / len(methods)
    for j, m in enumerate(methods):
        xs, ys, es = [], [], []
        for i, env in enumerate(envs):
            for r in rows:
                if r["env"] == env and r["method"] == m:
                    xs.append(i + (j - (len(methods) - 1) / 2) * width)
                    ys.append(float(r["mean_return"]))
                    es.append(float(r["std_return"]))
        ax.bar(xs, ys, width=width * 0.9, yerr=es, capsize=3, label=m)
    ax.set_xticks(range(len(envs)))
    ax.set_xticklabels(envs)
    ax.set_ylabel("mean return (100-episode)")
    ax.legend()
    ax.set_title("evaluation returns")
    fig.tight_layout()
    p = Path(out_dir) / "eval_returns.svg"
    fig.savefig(p, **_SAVE_KW)
    plt.close(fig)
    return [p]
