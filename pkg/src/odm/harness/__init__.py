from .checkpoint import load_model, save_model
from .cli import build_parser, main, resolve_task
from .config import (DESK_MODEL, DESK_TRAIN, TERRAIN_SUFFIX, RunConfig,
                     desk_model_config, desk_train_config, load_config,
                     save_config)
from .metrics import (COLUMNS, MetricsWriter, read_metrics,
                      rows_without_wall_clock)
from .plots import plot_eval, plot_finetune, plot_pretrain

__all__ = [
    "load_model", "save_model",
    "build_parser", "main", "resolve_task",
    "DESK_MODEL", "DESK_TRAIN", "TERRAIN_SUFFIX", "RunConfig",
    "desk_model_config", "desk_train_config", "load_config", "save_config",
    "COLUMNS", "MetricsWriter", "read_metrics", "rows_without_wall_clock",
    "plot_eval", "plot_finetune", "plot_pretrain",
]
