from .morphology import PROMPT_SCALE, MorphologySpec, reference_registry
from .network import (LOG_STD_MAX, LOG_STD_MIN, ModelConfig, OdmModel,
                      PolicyOutput)

__all__ = [
    "PROMPT_SCALE", "MorphologySpec", "reference_registry",
    "LOG_STD_MAX", "LOG_STD_MIN", "ModelConfig", "OdmModel", "PolicyOutput",
]
