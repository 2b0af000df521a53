"""Forward noising, training loss, and (guided) reverse sampling.

The reverse chain follows the fixed-variance parametrization: the model
predicts the added noise, the posterior mean is recovered from it, and
classifier guidance shifts that mean by omega * sigma_k^2 * gradient.
Opponent clamping replaces designated agents with the forward-noised
reference at every step (exactly the reference at k = 0), which pins
recorded/replayed agents and the conditional-mode ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..madit.model import ConditionBundle, Denoiser
from ..pitchdata.pitch import RAW_BOUNDS_X, RAW_BOUNDS_Y, normalize, snap_to_grid
from ..pitchdata.simulate import splitmix64
from .schedule import NoiseSchedule


@dataclass
class SamplerConfig:
    n_samples: int = 20
    seed: int = 0
    guidance_scale: float = 0.0
    guided_team: str = "none"  # attacking | defending | none
    opponent_mode: str = "reactive"  # recorded | replayed | reactive
    ball_mode: str = "predictive"
    sigma_zero: bool = False  # force deterministic reverse steps

    def __post_init__(self):
        if self.guided_team not in ("attacking", "defending", "none"):
            raise ValueError(f"unknown guided team {self.guided_team!r}")
        if self.opponent_mode not in ("recorded", "replayed", "reactive"):
            raise ValueError(f"unknown opponent mode {self.opponent_mode!r}")
        if self.guidance_scale < 0:
            raise ValueError("guidance scale must be >= 0")


class GuidanceError(RuntimeError):
    pass


def q_sample(tau0, k, eps, schedule: NoiseSchedule):
    """Closed-form forward noising sqrt(ab_k) tau0 + sqrt(1 - ab_k) eps.

    ``k`` is an int applied to the whole array, or a (B,) vector matching
    the leading axis of ``tau0``.
    """
    tau0 = np.asarray(tau0)
    ks = np.asarray(k)
    if np.any(ks < 0) or np.any(ks > schedule.K):
        raise ValueError(f"diffusion step out of range: {k}")
    ab = schedule.alpha_bar[ks]
    if ks.ndim:
        ab = ab.reshape((len(ks),) + (1,) * (tau0.ndim - 1))
    return np.sqrt(ab) * tau0 + np.sqrt(1.0 - ab) * np.asarray(eps)


def posterior_mean(tau_k, eps_hat, k: int, schedule: NoiseSchedule):
    """mu_theta = (tau_k - beta_k / sqrt(1 - ab_k) * eps_hat) / sqrt(alpha_k)."""
    if not 1 <= k <= schedule.K:
        raise ValueError(f"diffusion step out of range: {k}")
    b, a, ab = schedule.beta[k], schedule.alpha[k], schedule.alpha_bar[k]
    return (np.asarray(tau_k) - (b / np.sqrt(1.0 - ab)) * np.asarray(eps_hat)) / np.sqrt(a)


def estimate_clean_from_eps(tau_k, eps_hat, k: int, schedule: NoiseSchedule):
    """tau0_hat = (tau_k - sqrt(1 - ab_k) eps_hat) / sqrt(ab_k)."""
    ab = schedule.alpha_bar[k]
    return (np.asarray(tau_k) - np.sqrt(1.0 - ab) * np.asarray(eps_hat)) / np.sqrt(ab)


def estimate_clean(tau_k, k: int, cond: ConditionBundle, denoiser: Denoiser, schedule: NoiseSchedule):
    """Denoiser-based clean-window estimate (numpy path)."""
    eps_hat = denoiser.predict_noise(tau_k, np.full(np.shape(tau_k)[0], k), cond)
    return estimate_clean_from_eps(tau_k, eps_hat, k, schedule)


def training_loss(windows, masks, conds: ConditionBundle, denoiser: Denoiser, schedule: NoiseSchedule, rng: np.random.Generator) -> float:
    """Masked epsilon-MSE over one batch with freshly sampled (k, eps).

    All 64 frames participate (context frames included); padded frames are
    excluded by the validity mask.
    """
    windows = np.asarray(windows)
    B = windows.shape[0]
    k = rng.integers(1, schedule.K + 1, size=B)
    eps = rng.standard_normal(windows.shape)
    tau_k = q_sample(windows, k, eps, schedule)
    eps_hat = denoiser.predict_noise(tau_k, k, conds)
    m = np.asarray(masks)[..., None]
    return float(np.sum(m * (eps - eps_hat) ** 2) / (np.sum(m) * windows.shape[-1]))


def masked_mse(eps, eps_hat, masks) -> float:
    m = np.asarray(masks)[..., None]
    return float(np.sum(m * (np.asarray(eps) - np.asarray(eps_hat)) ** 2) / (np.sum(m) * np.shape(eps)[-1]))


#: Clean-estimate clip range during sampling; matches the window invariant.
CLIP_RANGE = 1.1


def reverse_step(
    tau_k,
    k: int,
    cond: ConditionBundle,
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    hook=None,
    omega: float = 0.0,
    clamp_agents: Optional[np.ndarray] = None,
    reference: Optional[np.ndarray] = None,
    clamp_context_frames: int = 0,
    sigma_zero: bool = False,
):
    """One reverse transition tau_k -> tau_{k-1} with optional guidance.

    The posterior mean is taken through the clipped clean estimate: with
    the last beta clipped to 0.999, the raw epsilon form divides by
    sqrt(alpha_K) ~ 0.03 and amplifies denoiser error explosively, so
    tau0_hat is clipped to the data range first (identical for exact
    noise estimates).  ``clamp_agents`` lists agent rows pinned to
    ``reference`` (normalized, (A, H, D) or batch-shaped);
    ``clamp_context_frames`` > 0 additionally pins the first frames of
    every agent (context inpainting for models without a context
    encoder).  Random draws are ordered independently of the hook, so
    omega = 0 is bit-identical to running without a hook.
    """
    tau_k = np.asarray(tau_k)
    eps_hat = denoiser.predict_noise(tau_k, np.full(tau_k.shape[0], k), cond)
    tau0_hat = np.clip(estimate_clean_from_eps(tau_k, eps_hat, k, schedule), -CLIP_RANGE, CLIP_RANGE)
    ab, ab_prev = schedule.alpha_bar[k], schedule.alpha_bar[k - 1]
    beta, alpha = schedule.beta[k], schedule.alpha[k]
    mu = (np.sqrt(ab_prev) * beta / (1.0 - ab)) * tau0_hat + (np.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab)) * tau_k

    if hook is not None and omega > 0.0:
        grad, _score = hook(tau_k, k, cond)
        if not np.all(np.isfinite(grad)):
            raise GuidanceError(f"non-finite guidance gradient from objective {getattr(hook, 'name', '?')!r}")
        mu = mu + omega * schedule.sigma2[k] * grad

    if k > 1 and not sigma_zero:
        z = rng.standard_normal(tau_k.shape)
        tau_prev = mu + np.sqrt(schedule.sigma2[k]) * z
    else:
        tau_prev = mu

    needs_ref = (clamp_agents is not None and len(clamp_agents)) or clamp_context_frames
    if needs_ref:
        if reference is None:
            raise ValueError("clamping requires a reference window")
        ref = np.broadcast_to(np.asarray(reference), tau_k.shape)
        if k - 1 == 0:
            noised_ref = ref
        else:
            eps_ref = rng.standard_normal(tau_k.shape)
            noised_ref = q_sample(ref, k - 1, eps_ref, schedule)
        if clamp_agents is not None and len(clamp_agents):
            tau_prev[:, clamp_agents] = noised_ref[:, clamp_agents]
        if clamp_context_frames:
            tau_prev[:, :, :clamp_context_frames] = noised_ref[:, :, :clamp_context_frames]
    return tau_prev


def clamp_mask_for(config: SamplerConfig, ball_conditional: bool) -> np.ndarray:
    """Agent rows to pin, from guided team / opponent mode / ball mode."""
    agents = []
    if config.opponent_mode in ("recorded", "replayed") and config.guided_team != "none":
        if config.guided_team == "attacking":
            agents.extend(range(11, 22))
        else:
            agents.extend(range(0, 11))
    if ball_conditional:
        agents.append(22)
    return np.asarray(sorted(set(agents)), dtype=np.intp)


def sample(
    cond: ConditionBundle,
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    reference: Optional[np.ndarray] = None,
    hook=None,
    clamp_context_frames: int = 0,
):
    """Draw N windows by running independent guided reverse chains.

    Returns (trajectories in meters (N, A, H, D), per-sample guidance
    scores or None).  Chains are seeded per sample by splitmix64 of the
    config seed, so results are reproducible and independent of N-batching.
    """
    N = config.n_samples
    cfg = denoiser.cfg
    shape = (N, cfg.agents, cfg.horizon, 2)
    rngs = [np.random.default_rng(np.random.PCG64(splitmix64((config.seed << 8) + i))) for i in range(N)]

    ball_conditional = config.ball_mode == "conditional"
    clamp_agents = clamp_mask_for(config, ball_conditional)
    if (len(clamp_agents) or clamp_context_frames) and reference is None:
        raise ValueError(f"opponent mode {config.opponent_mode!r} / conditional ball requires a reference window")

    batch_cond = cond.repeat(N) if cond.batch == 1 else cond
    tau = np.stack([r.standard_normal(shape[1:]) for r in rngs])
    omega = config.guidance_scale if hook is not None else 0.0

    class _BatchRng:
        """Per-sample generators behind a batched standard_normal."""

        def standard_normal(self, s):
            return np.stack([r.standard_normal(s[1:]) for r in rngs])

    brng = _BatchRng()
    for k in range(schedule.K, 0, -1):
        tau = reverse_step(
            tau,
            k,
            batch_cond,
            denoiser,
            schedule,
            brng,
            hook=hook,
            omega=omega,
            clamp_agents=clamp_agents,
            reference=reference,
            clamp_context_frames=clamp_context_frames,
            sigma_zero=config.sigma_zero,
        )

    meters = normalize(tau, inverse=True)
    np.clip(meters[..., 0], RAW_BOUNDS_X[0], RAW_BOUNDS_X[1], out=meters[..., 0])
    np.clip(meters[..., 1], RAW_BOUNDS_Y[0], RAW_BOUNDS_Y[1], out=meters[..., 1])
    if len(clamp_agents):
        # pinned agents end exactly at their reference values
        ref_m = normalize(np.broadcast_to(reference, tau.shape), inverse=True)
        meters[:, clamp_agents] = snap_to_grid(ref_m[:, clamp_agents])
    meters = snap_to_grid(meters)

    scores = None
    if hook is not None:
        one_cond = cond if cond.batch == 1 else cond.take(slice(0, 1))
        scores = np.asarray([hook.score_meters(meters[i], one_cond) for i in range(N)], dtype=np.float64)
    return meters, scores
