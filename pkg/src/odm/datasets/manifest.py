"""Dataset summary statistics in the demonstration-table layout."""

from __future__ import annotations

import configparser
from dataclasses import dataclass


@dataclass
class DatasetManifest:
    env: str
    source: str
    tier: str
    n_samples: int   # total steps
    n_episodes: int
    return_mean: float
    return_std: float   # population std
    length_mean: float
    length_std: float

    def summary(self) -> str:
        return (f"{self.env}/{self.tier}: {self.n_samples} samples, "
                f"{self.n_episodes} episodes, "
                f"return {self.return_mean:.2f}±{self.return_std:.2f}, "
                f"length {self.length_mean:.2f}±{self.length_std:.2f}")


def compute_manifest(episodes, env: str, tier: str,
                     source: str = "scripted-pioneer") -> DatasetManifest:
    n_eps = len(episodes)
    if n_eps == 0:
        return DatasetManifest(env, source, tier, 0, 0, 0.0, 0.0, 0.0, 0.0)
    rets = [ep.episode_return for ep in episodes]
    lens = [ep.length for ep in episodes]

    def mean_std(xs):
        mu = sum(xs) / len(xs)
        var = sum((x - mu) ** 2 for x in xs) / len(xs)
        return mu, var ** 0.5

    rm, rs = mean_std(rets)
    lm, ls = mean_std(lens)
    return DatasetManifest(env, source, tier, int(sum(lens)), n_eps,
                           rm, rs, lm, ls)


def save_manifest(path, m: DatasetManifest) -> None:
    cp = configparser.ConfigParser()
    cp["manifest"] = {
        "env": m.env,
        "source": m.source,
        "tier": m.tier,
        "n_samples": str(m.n_samples),
        "n_episodes": str(m.n_episodes),
        "return_mean": "%.17g" % m.return_mean,
        "return_std": "%.17g" % m.return_std,
        "length_mean": "%.17g" % m.length_mean,
        "length_std": "%.17g" % m.length_std,
    }
    with open(path, "w") as f:
        cp.write(f)


def load_manifest(path) -> DatasetManifest:
    cp = configparser.ConfigParser()
    with open(path) as f:
        cp.read_file(f)
    s = cp["manifest"]
    return DatasetManifest(
        env=s["env"], source=s["source"], tier=s["tier"],
        n_samples=int(s["n_samples"]), n_episodes=int(s["n_episodes"]),
        return_mean=float(s["return_mean"]), return_std=float(s["return_std"]),
        length_mean=float(s["length_mean"]), length_std=float(s["length_std"]))


def generate_dataset(env_name: str, tier: str, episode_count: int, seed: int,
                     out_dir, max_steps: int = 200):
    """Roll out a pioneer tier, write the episode file and its manifest."""
    from pathlib import Path
    from .episodes import generate_episodes, write_episodes

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = generate_episodes(env_name, tier, episode_count, seed, max_steps)
    data_path = out_dir / f"{env_name}-{tier}.jsonl"
    write_episodes(data_path, episodes)
    manifest = compute_manifest(episodes, env_name, tier)
    save_manifest(data_path.with_suffix(".manifest"), manifest)
    return data_path, manifest
