"""Diffusion mechanics: schedule, forward noising, losses, guided reverse sampling."""

from .schedule import NoiseSchedule, build_schedule
from .diffusion import (
    GuidanceError,
    SamplerConfig,
    clamp_mask_for,
    estimate_clean,
    estimate_clean_from_eps,
    masked_mse,
    posterior_mean,
    q_sample,
    reverse_step,
    sample,
    training_loss,
)
from .train import AdamW, OptimConfig, Trainer
