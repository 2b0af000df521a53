"""Differentiable pitch-control model: Gaussian influence + sigmoid contest.

Each player contributes influence exp(-||cell - p||^2 / (2 r^2)) to every
grid cell; a cell's attacking control is the logistic contest of the two
teams' log-influence (a stable log-sum-exp), so the nearer team dominates
even where absolute influence has decayed.  Attacking + defending control
is exactly 1 everywhere by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffnum as dn
from ..pitchdata.pitch import PITCH_LENGTH, PITCH_WIDTH


@dataclass(frozen=True)
class PitchControlConfig:
    grid_x: int = 24
    grid_y: int = 16
    radius: float = 8.0  # meters, Gaussian influence scale
    temperature: float = 1.0  # contest sharpness

    def __post_init__(self):
        if self.grid_x < 8 or self.grid_y < 8:
            raise ValueError("grid resolution must be at least 8x8")
        if self.radius <= 0 or self.temperature <= 0:
            raise ValueError("radius and temperature must be positive")

    def cell_centers(self):
        """(G, 2) centers of the grid cells over the full pitch."""
        xs = (np.arange(self.grid_x) + 0.5) * (PITCH_LENGTH / self.grid_x)
        ys = (np.arange(self.grid_y) + 0.5) * (PITCH_WIDTH / self.grid_y)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=-1)


def _log_influence(team, centers_x, centers_y, cfg: PitchControlConfig):
    """log sum_p exp(-||cell - p||^2 / (2 r^2)) per cell: (B, H, G).

    Computed as a log-sum-exp so far-away cells keep a meaningful (very
    negative) log-influence instead of underflowing to zero.
    """
    px = dn.reshape(team[:, :, :, 0], team.shape[:3] + (1,))  # (B,H,N,1)
    py = dn.reshape(team[:, :, :, 1], team.shape[:3] + (1,))
    dx = px - centers_x  # (B,H,N,G)
    dy = py - centers_y
    s = (dx * dx + dy * dy) * (-1.0 / (2.0 * cfg.radius**2))
    m = dn.max_(s, axis=2, keepdims=True)
    lse = dn.log(dn.sum_(dn.exp(s - m), axis=2))
    return lse + dn.reshape(m, lse.shape)


def build_control_field(att, deff, cfg: PitchControlConfig):
    """Attacking control per cell: (B, H, G) expression in [0, 1]."""
    centers = cfg.cell_centers().astype(np.float32)
    cx = dn.const(centers[:, 0].copy())
    cy = dn.const(centers[:, 1].copy())
    ia = _log_influence(att, cx, cy, cfg)
    idf = _log_influence(deff, cx, cy, cfg)
    return dn.sigmoid((ia - idf) * (1.0 / cfg.temperature))


def build_pcv_score(team, opp, cfg: PitchControlConfig):
    """Mean control of ``team`` against ``opp`` over frames and cells: (B,)."""
    control = build_control_field(team, opp, cfg)
    return dn.mean(control, axis=(1, 2))


def pitch_control_field(att_positions, def_positions, cfg: PitchControlConfig = PitchControlConfig()) -> np.ndarray:
    """Numpy entry point: one frame (11, 2) each -> (grid_x, grid_y) control."""
    att = dn.leaf("att", (1, 1) + np.shape(att_positions))
    deff = dn.leaf("def", (1, 1) + np.shape(def_positions))
    expr = build_control_field(att, deff, cfg)
    out = dn.evaluate(
        expr, {"att": np.asarray(att_positions)[None, None], "def": np.asarray(def_positions)[None, None]}
    )
    return out[0, 0].reshape(cfg.grid_x, cfg.grid_y)


def pcv_score(att_path, def_path, side: str = "attacking", cfg: PitchControlConfig = PitchControlConfig()) -> float:
    """Mean pitch control of one side over a whole window ((H, 11, 2) paths)."""
    att = dn.leaf("att", (1,) + np.shape(att_path))
    deff = dn.leaf("def", (1,) + np.shape(def_path))
    expr = build_pcv_score(att, deff, cfg) if side == "attacking" else build_pcv_score(deff, att, cfg)
    out = dn.evaluate(expr, {"att": np.asarray(att_path)[None], "def": np.asarray(def_path)[None]})
    return float(out[0])
