from .chain import (DT, ChainEnv, ChainEnvConfig, EnvState, make_env,
                    terrain_modifier, wrap_angle)
from .pioneers import (TIERS, PioneerPolicy, expert_torque, grid_search_gait,
                       load_gait_table, rollout_return)

__all__ = [
    "DT", "ChainEnv", "ChainEnvConfig", "EnvState", "make_env",
    "terrain_modifier", "wrap_angle",
    "TIERS", "PioneerPolicy", "expert_torque", "grid_search_gait",
    "load_gait_table", "rollout_return",
]
