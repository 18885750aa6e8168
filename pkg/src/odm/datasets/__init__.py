from .episodes import (EpisodeRecord, collect_episode, episode_from_line,
                       episode_to_line, generate_episodes, read_episodes,
                       write_episodes)
from .manifest import (DatasetManifest, compute_manifest, generate_dataset,
                       load_manifest, save_manifest)
from .windows import (TrajectoryWindow, episode_windows, stack_windows,
                      validation_split, window_iter)

__all__ = [
    "EpisodeRecord", "collect_episode", "episode_from_line", "episode_to_line",
    "generate_episodes", "read_episodes", "write_episodes",
    "DatasetManifest", "compute_manifest", "generate_dataset", "load_manifest",
    "save_manifest",
    "TrajectoryWindow", "episode_windows", "stack_windows", "validation_split",
    "window_iter",
]
