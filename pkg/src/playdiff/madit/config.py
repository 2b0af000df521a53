"""Denoiser architecture configuration, presets and parameter counting.

Transformer blocks run at ``hidden_dim`` width with a 4x MLP; the
trajectory embedding and all auxiliary embeddings (roles, action,
timestep frequencies, context encoding) live at ``emb_dim``.  Named
presets S..XXL follow the published scaling table; `S-desk` is the small
CPU-friendly variant used by the desk-scale training runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

N_GLOBAL_FEATURES = 4  # goal difference, outcome, possession length, controlling flag
N_ACTIONS = 30


@dataclass(frozen=True)
class ModelConfig:
    emb_dim: int = 32
    hidden_dim: int = 192
    layers: int = 2
    heads: int = 4
    agents: int = 23
    horizon: int = 64
    context_len: int = 10
    ball_mode: str = "predictive"  # predictive | conditional
    context_encoder: bool = True
    event_encoder: bool = True
    include_ball_destination: bool = False
    head: str = "noise"  # noise | scalar-value
    mixer_layers: int = 2

    def __post_init__(self):
        if self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")
        if self.ball_mode not in ("predictive", "conditional"):
            raise ValueError(f"unknown ball_mode {self.ball_mode!r}")
        if self.head not in ("noise", "scalar-value"):
            raise ValueError(f"unknown head {self.head!r}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads

    @property
    def n_global_inputs(self) -> int:
        # global features + time_to_event (+ ball destination x, y)
        return N_GLOBAL_FEATURES + 1 + (2 if self.include_ball_destination else 0)

    @property
    def n_modulation(self) -> int:
        # scale/shift/gate per sub-block: self-attn, (cross-attn), mlp
        return 9 if self.context_encoder else 6

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


#: Published scaling-table rows: (emb, hidden, layers, heads), params in M.
PRESET_TABLE: Dict[str, Tuple[int, int, int, int]] = {
    "S": (32, 192, 2, 4),
    "B": (64, 320, 3, 4),
    "L": (128, 512, 6, 8),
    "XL": (192, 768, 12, 12),
    "XXL": (256, 1024, 16, 16),
}

PRESET_PARAMS_M = {"S": 1.74, "B": 6.56, "L": 30.83, "XL": 132.87, "XXL": 311.50}

#: CPU-friendly variants for desk-scale runs and tests.
EXTRA_PRESETS: Dict[str, Tuple[int, int, int, int]] = {
    "S-desk": (32, 64, 2, 4),
    "micro": (8, 16, 1, 2),
}


def preset(name: str, **overrides) -> ModelConfig:
    table = {**PRESET_TABLE, **EXTRA_PRESETS}
    if name not in table:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(table)}")
    emb, hidden, layers, heads = table[name]
    kw = dict(emb_dim=emb, hidden_dim=hidden, layers=layers, heads=heads)
    kw.update(overrides)
    return ModelConfig(**kw)


def weight_spec(cfg: ModelConfig) -> Dict[str, tuple]:
    """Name -> shape for every learnable array of the model."""
    De, H, L = cfg.emb_dim, cfg.hidden_dim, cfg.layers
    hd = cfg.horizon * 2
    spec: Dict[str, tuple] = {}

    # trajectory embedding MLP (per agent, shared), roles, input projection
    spec["embed.w1"] = (hd, H)
    spec["embed.b1"] = (H,)
    spec["embed.w2"] = (H, De)
    spec["embed.b2"] = (De,)
    spec["role.table"] = (3, De)
    spec["in_proj.w"] = (De, H)
    spec["in_proj.b"] = (H,)
    # direct lift of the flattened trajectory into the token stream: the
    # emb_dim embedding alone is an information bottleneck for noise
    # prediction (the noise head must be able to pass the input through)
    spec["in_lift.w"] = (hd, H)

    # timestep conditioning MLP (sinusoidal emb_dim -> hidden -> hidden)
    spec["time.w1"] = (De, H)
    spec["time.b1"] = (H,)
    spec["time.w2"] = (H, H)
    spec["time.b2"] = (H,)

    for i in range(L):
        p = f"blk{i}."
        for name in ("sa.wq", "sa.wk", "sa.wv", "sa.wo"):
            spec[p + name] = (H, H)
        for name in ("sa.bq", "sa.bk", "sa.bv", "sa.bo"):
            spec[p + name] = (H,)
        if cfg.context_encoder:
            spec[p + "ca.wq"] = (H, H)
            spec[p + "ca.wk"] = (De, H)
            spec[p + "ca.wv"] = (De, H)
            spec[p + "ca.wo"] = (H, H)
            for name in ("ca.bq", "ca.bk", "ca.bv", "ca.bo"):
                spec[p + name] = (H,)
        spec[p + "mlp.w1"] = (H, 4 * H)
        spec[p + "mlp.b1"] = (4 * H,)
        spec[p + "mlp.w2"] = (4 * H, H)
        spec[p + "mlp.b2"] = (H,)
        spec[p + "ada.w"] = (H, cfg.n_modulation * H)
        spec[p + "ada.b"] = (cfg.n_modulation * H,)

    spec["final.ada.w"] = (H, 2 * H)
    spec["final.ada.b"] = (2 * H,)
    if cfg.head == "noise":
        spec["head.w"] = (H, hd)
        spec["head.b"] = (hd,)
        # conditioning-gated input skip: lets the head express the
        # dominant eps ~ sqrt(1 - alpha_bar_k) * tau_k component exactly
        spec["out_skip.w"] = (H, 1)
        spec["out_skip.b"] = (1,)
    else:
        spec["vhead.w1"] = (H, H)
        spec["vhead.b1"] = (H,)
        spec["vhead.w2"] = (H, 1)
        spec["vhead.b2"] = (1,)

    if cfg.context_encoder:
        spec["ctx.embed.w"] = (2, De)
        spec["ctx.embed.b"] = (De,)
        for i in range(cfg.mixer_layers):
            p = f"ctx.mix{i}."
            spec[p + "tok.w1"] = (cfg.context_len, cfg.context_len)
            spec[p + "tok.b1"] = (cfg.context_len,)
            spec[p + "tok.w2"] = (cfg.context_len, cfg.context_len)
            spec[p + "tok.b2"] = (cfg.context_len,)
            spec[p + "ch.w1"] = (De, De)
            spec[p + "ch.b1"] = (De,)
            spec[p + "ch.w2"] = (De, De)
            spec[p + "ch.b2"] = (De,)
            if cfg.ball_mode == "conditional":
                q = f"ctxball.mix{i}."
                spec[q + "tok.w1"] = (cfg.horizon, cfg.horizon)
                spec[q + "tok.b1"] = (cfg.horizon,)
                spec[q + "tok.w2"] = (cfg.horizon, cfg.horizon)
                spec[q + "tok.b2"] = (cfg.horizon,)
        spec["ctx.attn.wq"] = (De, H)
        spec["ctx.attn.wk"] = (De, H)
        spec["ctx.attn.wv"] = (De, H)
        spec["ctx.attn.wo"] = (H, De)
        for name in ("ctx.attn.bq", "ctx.attn.bk", "ctx.attn.bv"):
            spec[name] = (H,)
        spec["ctx.attn.bo"] = (De,)
        # ungated residual path of the per-agent context encoding into the
        # token stream; cross-attention alone conditions too weakly for a
        # desk-scale model to anchor coarse placement
        spec["in_ctx.w"] = (De, H)

    if cfg.event_encoder:
        spec["ev.action.table"] = (N_ACTIONS, De)
        spec["ev.action.w"] = (De, H)
        spec["ev.action.b"] = (H,)
        spec["ev.glob.w1"] = (cfg.n_global_inputs, H)
        spec["ev.glob.b1"] = (H,)
        spec["ev.glob.w2"] = (H, H)
        spec["ev.glob.b2"] = (H,)
        spec["ev.fuse.w"] = (3 * H, H)
        spec["ev.fuse.b"] = (H,)
    return spec


def parameter_count(cfg: ModelConfig) -> int:
    """Exact number of scalar parameters for the full configuration."""
    total = 0
    for shape in weight_spec(cfg).values():
        n = 1
        for s in shape:
            n *= s
        total += n
    return total


def backbone_parameter_count(cfg: ModelConfig) -> int:
    """Parameter count with context and event encoders stripped.

    This is the configuration the scaling runs use (timestep conditioning
    only), and the one compared against the published totals.
    """
    return parameter_count(cfg.with_(context_encoder=False, event_encoder=False))
