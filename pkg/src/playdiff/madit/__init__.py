"""Multi-agent diffusion-transformer denoiser, value model, checkpoints."""

from .config import (
    ModelConfig,
    PRESET_PARAMS_M,
    PRESET_TABLE,
    backbone_parameter_count,
    parameter_count,
    preset,
    weight_spec,
)
from .weights import init_weights, load_checkpoint, save_checkpoint
from .model import (
    ConditionBundle,
    Denoiser,
    batch_from_windows,
    build_denoiser,
    condition_from_record,
    stack_conditions,
    timestep_embedding,
)
