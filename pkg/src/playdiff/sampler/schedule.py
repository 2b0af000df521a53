"""Cosine variance schedule for the discrete diffusion chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

COSINE_S = 0.008
BETA_CLIP = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step beta_k, alpha_k, alpha-bar_k and posterior variance.

    Arrays are indexed by k in 1..K; index 0 holds the k=0 boundary
    (alpha_bar_0 = 1) so q_sample(tau_0, 0) is exactly tau_0.
    """

    K: int
    beta: np.ndarray  # (K+1,), beta[0] = 0
    alpha: np.ndarray  # (K+1,), alpha[0] = 1
    alpha_bar: np.ndarray  # (K+1,), alpha_bar[0] = 1
    sigma2: np.ndarray  # (K+1,), clipped posterior variance, sigma2[1] = 0

    def __post_init__(self):
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if np.any(self.beta[1:] <= 0) or np.any(self.beta[1:] > BETA_CLIP):
            raise ValueError("beta_k must lie in (0, 0.999]")
        if np.any(self.sigma2 < 0):
            raise ValueError("posterior variance must be non-negative")


def build_schedule(K: int) -> NoiseSchedule:
    """Cosine schedule: alpha_bar_k = f(k)/f(0) with the canonical offset.

    f(k) = cos^2(((k/K + s)/(1 + s)) * pi/2), s = 0.008; beta_k clipped to
    0.999; sigma_k^2 is the posterior variance
    ((1 - alpha_bar_{k-1}) / (1 - alpha_bar_k)) * beta_k.
    """
    if K < 2:
        raise ValueError(f"need at least 2 diffusion steps, got {K}")
    k = np.arange(K + 1, dtype=np.float64)
    f = np.cos(((k / K + COSINE_S) / (1.0 + COSINE_S)) * (math.pi / 2.0)) ** 2
    alpha_bar = f / f[0]
    beta = np.zeros(K + 1)
    beta[1:] = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 0.0, BETA_CLIP)
    alpha = 1.0 - beta
    # re-derive alpha_bar from clipped betas so the product identity is exact
    alpha_bar = np.cumprod(alpha)
    sigma2 = np.zeros(K + 1)
    sigma2[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
    return NoiseSchedule(K=K, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma2=sigma2)
