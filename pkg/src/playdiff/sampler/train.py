"""Denoiser / value-model training: AdamW with decoupled decay plus EMA.

The masked-MSE loss graph is compiled once per batch shape and
re-evaluated with fresh (k, eps) draws every step.  EMA weights shadow
the raw weights and are the ones used for sampling and evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .. import diffnum as dn
from ..madit.config import ModelConfig
from ..madit.model import ConditionBundle, Denoiser, build_denoiser, timestep_embedding
from .diffusion import q_sample
from .schedule import NoiseSchedule


@dataclass
class OptimConfig:
    lr: float = 3e-4  # desk-scale default; the reference full-scale rate is 3e-5
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    ema_decay: float = 0.995
    grad_clip: float = 1.0


class AdamW:
    """Decoupled-weight-decay Adam over a dict of float32 arrays."""

    def __init__(self, params: Dict[str, np.ndarray], cfg: OptimConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]):
        c = self.cfg
        self.t += 1
        b1, b2 = c.betas
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        gnorm = np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
        scale = min(1.0, c.grad_clip / (gnorm + 1e-12)) if c.grad_clip else 1.0
        for k, p in params.items():
            g = grads[k].astype(p.dtype, copy=False) * scale
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mh = self.m[k] / bias1
            vh = self.v[k] / bias2
            p -= c.lr * (mh / (np.sqrt(vh) + c.eps) + c.weight_decay * p)
        return gnorm


class Trainer:
    """Single-writer training loop over a window dataset."""

    def __init__(self, denoiser: Denoiser, schedule: NoiseSchedule, optim: Optional[OptimConfig] = None, seed: int = 0):
        self.denoiser = denoiser
        self.schedule = schedule
        self.optim_cfg = optim or OptimConfig()
        self.opt = AdamW(denoiser.weights, self.optim_cfg)
        self.rng = np.random.default_rng(seed)
        self.ema = {k: v.copy() for k, v in denoiser.weights.items()}
        self._loss_graphs: Dict[int, tuple] = {}
        self.history: list = []

    def _loss_graph(self, batch: int):
        if batch not in self._loss_graphs:
            out, _, W = build_denoiser(self.denoiser.cfg, batch)
            eps = dn.leaf("eps", out.shape)
            mask = dn.leaf("mask", out.shape[:-1] + (1,))
            if self.denoiser.cfg.head == "noise":
                err = (eps - out) * mask
                loss = dn.sum_(err * err) / (dn.sum_(mask) * 2.0)
            else:
                target = dn.leaf("target", (batch,))
                diff = out - target
                loss = dn.sum_(diff * diff) / float(batch)
            names = list(W)
            self._loss_graphs[batch] = (loss, names)
        return self._loss_graphs[batch]

    def noise_step(self, windows: np.ndarray, masks: np.ndarray, cond: ConditionBundle) -> float:
        """One denoiser update on a batch of clean normalized windows."""
        B = windows.shape[0]
        loss, names = self._loss_graph(B)
        dtype = self.denoiser.weights["embed.w1"].dtype
        k = self.rng.integers(1, self.schedule.K + 1, size=B)
        eps = self.rng.standard_normal(windows.shape)
        tau_k = q_sample(windows, k, eps, self.schedule)
        ab = self.schedule.alpha_bar[k].reshape(-1, 1, 1, 1)
        binds = {
            "tau": tau_k.astype(dtype),
            "eps": eps.astype(dtype),
            "mask": masks[..., None].astype(dtype),
            "t_emb": timestep_embedding(k, self.denoiser.cfg.emb_dim).astype(dtype),
            "coef_sqab": np.sqrt(ab).astype(dtype),
            "coef_inv_sq1mab": (1.0 / np.sqrt(1.0 - ab)).astype(dtype),
        }
        binds.update({k_: v.astype(dtype, copy=False) for k_, v in cond.bindings().items()})
        binds.update(self.denoiser.weights)
        value, grads = dn.value_and_gradient(loss, names, binds, check_finite=False)
        if not np.isfinite(value):
            raise FloatingPointError(f"training loss became non-finite at step {self.opt.t}")
        self.opt.step(self.denoiser.weights, grads)
        self._update_ema()
        self.history.append(float(value))
        return float(value)

    def value_step(self, windows: np.ndarray, targets: np.ndarray, cond: ConditionBundle, k_step: int = 1) -> float:
        """One value-model update: MSE(V(window), return) on clean windows."""
        B = windows.shape[0]
        loss, names = self._loss_graph(B)
        dtype = self.denoiser.weights["embed.w1"].dtype
        binds = {
            "tau": windows.astype(dtype),
            "target": targets.astype(dtype),
            "t_emb": timestep_embedding(np.full(B, k_step), self.denoiser.cfg.emb_dim).astype(dtype),
        }
        binds.update({k_: v.astype(dtype, copy=False) for k_, v in cond.bindings().items()})
        binds.update(self.denoiser.weights)
        value, grads = dn.value_and_gradient(loss, names, binds, check_finite=False)
        if not np.isfinite(value):
            raise FloatingPointError(f"value loss became non-finite at step {self.opt.t}")
        self.opt.step(self.denoiser.weights, grads)
        self._update_ema()
        self.history.append(float(value))
        return float(value)

    def _update_ema(self):
        d = self.optim_cfg.ema_decay
        for k, v in self.denoiser.weights.items():
            self.ema[k] = d * self.ema[k] + (1.0 - d) * v

    def ema_denoiser(self) -> Denoiser:
        return Denoiser(self.denoiser.cfg, {k: v.copy() for k, v in self.ema.items()})
