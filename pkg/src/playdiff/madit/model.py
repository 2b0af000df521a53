"""Symbolic forward graphs of the multi-agent diffusion-transformer denoiser.

The denoiser embeds each agent's flattened noisy trajectory with a shared
MLP plus a role embedding, lifts tokens to the block width, then applies
adaptively-modulated agent self-attention, cross-attention against the
context encoding, and an MLP, all with zero-initialized gates.  The
context encoder runs an MLP-Mixer per agent over the observed frames,
mean-pools the horizon and fuses agents with one self-attention layer.
Event information (action, global features, timestep) conditions every
block through the adaptive layer-norm modulation.

Graphs are built once per (config, batch, head) and re-evaluated with
fresh bindings, so training steps and sampling chains share compiled
graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .. import diffnum as dn
from ..pitchdata.pitch import ACTION_INDEX
from ..pitchdata.windows import TrajectoryWindow
from ..pitchdata import normalize
from .config import ModelConfig, N_ACTIONS

# feature scaling for global inputs, keeps desk-scale training stable
_GOAL_DIFF_SCALE = 1.0 / 3.0
_POSSESSION_SCALE = 1.0 / 30.0
_TTE_SCALE = 1.0 / 6.4


@dataclass
class ConditionBundle:
    """Numpy-side conditioning arrays for a batch of windows."""

    ctx_players: np.ndarray  # (B, 22, 10, 2) normalized
    ctx_ball: np.ndarray  # (B, 10, 2) predictive | (B, 64, 2) conditional
    action_onehot: np.ndarray  # (B, 30)
    global_features: np.ndarray  # (B, n_global_inputs) scaled
    ball_mode: str = "predictive"

    @property
    def batch(self) -> int:
        return self.ctx_players.shape[0]

    def bindings(self) -> Dict[str, np.ndarray]:
        return {
            "ctx_p": self.ctx_players,
            "ctx_b": self.ctx_ball,
            "action": self.action_onehot,
            "globals": self.global_features,
        }

    def take(self, idx) -> "ConditionBundle":
        return ConditionBundle(
            self.ctx_players[idx],
            self.ctx_ball[idx],
            self.action_onehot[idx],
            self.global_features[idx],
            self.ball_mode,
        )

    def repeat(self, n: int) -> "ConditionBundle":
        return ConditionBundle(
            np.repeat(self.ctx_players, n, axis=0),
            np.repeat(self.ctx_ball, n, axis=0),
            np.repeat(self.action_onehot, n, axis=0),
            np.repeat(self.global_features, n, axis=0),
            self.ball_mode,
        )


def condition_from_record(window: TrajectoryWindow, record, cfg: ModelConfig) -> ConditionBundle:
    """Build a single-window (batch 1) bundle from a record and its window."""
    ctx = window.positions[:, : window.context_len]  # (23, 10, 2) normalized
    players = ctx[:22][None]
    if cfg.ball_mode == "conditional":
        ball = window.positions[22][None]  # full 64 frames
    else:
        ball = ctx[22][None]
    onehot = np.zeros((1, N_ACTIONS))
    onehot[0, ACTION_INDEX[record.action]] = 1.0
    glob = record.global_feature
    feats = [
        glob["goal_difference"] * _GOAL_DIFF_SCALE,
        glob["outcome"],
        glob["possession_length"] * _POSSESSION_SCALE,
        glob["controlling_team"],
        record.time_to_event * _TTE_SCALE,
    ]
    if cfg.include_ball_destination:
        feats.extend(normalize(np.asarray(record.action_destination)).tolist())
    return ConditionBundle(players, ball, onehot, np.asarray(feats)[None], cfg.ball_mode)


def batch_from_windows(pairs, cfg: ModelConfig):
    """(windows, records) pairs -> (positions, masks, ConditionBundle)."""
    ws, rs = zip(*pairs)
    pos = np.stack([w.positions for w in ws])
    mask = np.stack([w.validity for w in ws])
    cond = stack_conditions([condition_from_record(w, r, cfg) for w, r in zip(ws, rs)])
    return pos, mask, cond


class WindowBank:
    """All windows of a dataset pre-stacked for fast minibatch slicing."""

    def __init__(self, pairs, cfg: ModelConfig, dtype=np.float32):
        self.cfg = cfg
        pos, mask, cond = batch_from_windows(pairs, cfg)
        self.positions = pos.astype(dtype)
        self.masks = mask.astype(dtype)
        self.cond = ConditionBundle(
            cond.ctx_players.astype(dtype),
            cond.ctx_ball.astype(dtype),
            cond.action_onehot.astype(dtype),
            cond.global_features.astype(dtype),
            cond.ball_mode,
        )

    def __len__(self):
        return self.positions.shape[0]

    def take(self, idx):
        return self.positions[idx], self.masks[idx], self.cond.take(idx)


def stack_conditions(bundles) -> ConditionBundle:
    return ConditionBundle(
        np.concatenate([b.ctx_players for b in bundles]),
        np.concatenate([b.ctx_ball for b in bundles]),
        np.concatenate([b.action_onehot for b in bundles]),
        np.concatenate([b.global_features for b in bundles]),
        bundles[0].ball_mode,
    )


def timestep_embedding(k, dim: int, max_period: float = 10_000.0) -> np.ndarray:
    """Sinusoidal embedding of diffusion steps; (B, dim) float64."""
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / max(half, 1))
    args = k[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((len(k), 1))], axis=1)
    return emb


# ---------------------------------------------------------------------------
# Graph builders.  `W` maps weight name -> leaf DiffExpr.
# ---------------------------------------------------------------------------


def _linear(x, W, w, b=None):
    # flatten leading axes: one large GEMM beats numpy's batched-matmul loop
    wexpr = W[w]
    if x.ndim > 2:
        lead = x.shape[:-1]
        n = 1
        for s in lead:
            n *= s
        out = dn.reshape(dn.reshape(x, (n, x.shape[-1])) @ wexpr, lead + (wexpr.shape[1],))
    else:
        out = x @ wexpr
    return out + W[b] if b else out


def _mlp_gelu(x, W, w1, b1, w2, b2):
    return _linear(dn.gelu(_linear(x, W, w1, b1)), W, w2, b2)


def build_agent_attention(q_tokens, kv_tokens, W, prefix: str, heads: int):
    """Multi-head scaled dot-product attention over the agent axis.

    ``q_tokens``: (B, A, dq); ``kv_tokens``: (B, A', dkv).  Projections
    read their widths from the weights; output width follows ``wo``.
    """
    B, A, _ = q_tokens.shape
    Ak = kv_tokens.shape[1]
    hidden = W[prefix + "wq"].shape[1]
    if hidden % heads:
        raise dn.ShapeError(f"attention width {hidden} not divisible by {heads} heads")
    dk = hidden // heads

    def split(x, n_agents):
        x = dn.reshape(x, (B, n_agents, heads, dk))
        return dn.transpose(x, (0, 2, 1, 3))

    q = split(_linear(q_tokens, W, prefix + "wq", prefix + "bq"), A)
    k = split(_linear(kv_tokens, W, prefix + "wk", prefix + "bk"), Ak)
    v = split(_linear(kv_tokens, W, prefix + "wv", prefix + "bv"), Ak)
    scores = (q @ dn.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dk))
    att = dn.softmax(scores, axis=-1)
    out = dn.transpose(att @ v, (0, 2, 1, 3))
    out = dn.reshape(out, (B, A, hidden))
    return _linear(out, W, prefix + "wo", prefix + "bo"), att


def build_trajectory_embedding(tau, W, cfg: ModelConfig):
    """Eq.-style shared per-agent MLP over flattened frames + role embedding."""
    B = tau.shape[0]
    flat = dn.reshape(tau, (B, cfg.agents, cfg.horizon * 2))
    emb = _mlp_gelu(flat, W, "embed.w1", "embed.b1", "embed.w2", "embed.b2")
    # float32 one-hot: never forces an upcast, exact in either precision
    roles = np.zeros((cfg.agents, 3), dtype=np.float32)
    roles[np.arange(cfg.agents), [0] * 11 + [1] * 11 + [2]] = 1.0
    role_emb = dn.const(roles) @ W["role.table"]
    return emb + role_emb, flat


def _mixer(tokens, W, prefix_tok: str, prefix_ch: str, n_frames: int):
    """One MLP-Mixer layer: token mix over frames, channel mix over features."""
    tok_in = dn.transpose(dn.layer_norm(tokens, axis=-1), (0, 1, 3, 2))
    tok = _mlp_gelu(tok_in, W, prefix_tok + "w1", prefix_tok + "b1", prefix_tok + "w2", prefix_tok + "b2")
    tokens = tokens + dn.transpose(tok, (0, 1, 3, 2))
    ch = _mlp_gelu(dn.layer_norm(tokens, axis=-1), W, prefix_ch + "w1", prefix_ch + "b1", prefix_ch + "w2", prefix_ch + "b2")
    return tokens + ch


def build_context_encoding(W, cfg: ModelConfig, batch: int):
    """Per-agent MLP-Mixer, horizon mean-pool, one fusing self-attention."""
    ctx_p = dn.leaf("ctx_p", (batch, 22, cfg.context_len, 2))
    ball_len = cfg.horizon if cfg.ball_mode == "conditional" else cfg.context_len
    ctx_b = dn.leaf("ctx_b", (batch, ball_len, 2))

    p = _linear(ctx_p, W, "ctx.embed.w", "ctx.embed.b")  # (B, 22, Hc, De)
    b = _linear(dn.reshape(ctx_b, (batch, 1, ball_len, 2)), W, "ctx.embed.w", "ctx.embed.b")
    for i in range(cfg.mixer_layers):
        p = _mixer(p, W, f"ctx.mix{i}.tok.", f"ctx.mix{i}.ch.", cfg.context_len)
        tok_prefix = f"ctxball.mix{i}.tok." if cfg.ball_mode == "conditional" else f"ctx.mix{i}.tok."
        b = _mixer(b, W, tok_prefix, f"ctx.mix{i}.ch.", ball_len)
    pooled = dn.concatenate([dn.mean(p, axis=2), dn.mean(b, axis=2)], axis=1)  # (B, 23, De)
    fused, _ = build_agent_attention(pooled, pooled, W, "ctx.attn.", cfg.heads)
    return pooled + fused


def build_condition_vector(W, cfg: ModelConfig, batch: int):
    """Fused conditioning vector (B, hidden) from timestep + event inputs."""
    t_emb = dn.leaf("t_emb", (batch, cfg.emb_dim))
    t_vec = _mlp_gelu(t_emb, W, "time.w1", "time.b1", "time.w2", "time.b2")
    if not cfg.event_encoder:
        return t_vec
    action = dn.leaf("action", (batch, N_ACTIONS))
    act_vec = _linear(dn.gelu(action @ W["ev.action.table"]), W, "ev.action.w", "ev.action.b")
    glob = dn.leaf("globals", (batch, cfg.n_global_inputs))
    glob_vec = _mlp_gelu(glob, W, "ev.glob.w1", "ev.glob.b1", "ev.glob.w2", "ev.glob.b2")
    fused = dn.concatenate([act_vec, glob_vec, t_vec], axis=1)
    return _linear(dn.gelu(fused), W, "ev.fuse.w", "ev.fuse.b")


def build_modulation(cond, W, prefix: str, n_mod: int, hidden: int, batch: int):
    """Per-block scale/shift/gate parameters, (B, 1, hidden) each."""
    mod = _linear(cond, W, prefix + "ada.w", prefix + "ada.b")
    parts = []
    for i in range(n_mod):
        parts.append(dn.reshape(mod[:, i * hidden : (i + 1) * hidden], (batch, 1, hidden)))
    return parts


def build_denoiser(cfg: ModelConfig, batch: int):
    """Full forward graph. Returns (output expr, attention probes, leaves)."""
    W = {name: dn.leaf(name, shape) for name, shape in _weight_shapes(cfg).items()}
    B, A, H = batch, cfg.agents, cfg.hidden_dim
    tau = dn.leaf("tau", (B, A, cfg.horizon, 2))

    emb, flat = build_trajectory_embedding(tau, W, cfg)
    h = _linear(emb, W, "in_proj.w", "in_proj.b") + _linear(flat, W, "in_lift.w")
    cond = build_condition_vector(W, cfg, B)
    ctx = build_context_encoding(W, cfg, B) if cfg.context_encoder else None
    if ctx is not None:
        h = h + _linear(ctx, W, "in_ctx.w")

    attn_probes = []
    for i in range(cfg.layers):
        p = f"blk{i}."
        mods = build_modulation(cond, W, p, cfg.n_modulation, H, B)
        mi = iter(mods)
        s, t, g = next(mi), next(mi), next(mi)
        u = dn.layer_norm(h, axis=-1) * (s + 1.0) + t
        sa, att = build_agent_attention(u, u, W, p + "sa.", cfg.heads)
        attn_probes.append(att)
        h = h + g * sa
        if cfg.context_encoder:
            s, t, g = next(mi), next(mi), next(mi)
            u = dn.layer_norm(h, axis=-1) * (s + 1.0) + t
            ca, att = build_agent_attention(u, ctx, W, p + "ca.", cfg.heads)
            attn_probes.append(att)
            h = h + g * ca
        s, t, g = next(mi), next(mi), next(mi)
        u = dn.layer_norm(h, axis=-1) * (s + 1.0) + t
        h = h + g * _mlp_gelu(u, W, p + "mlp.w1", p + "mlp.b1", p + "mlp.w2", p + "mlp.b2")

    fmod = _linear(cond, W, "final.ada.w", "final.ada.b")
    fs = dn.reshape(fmod[:, :H], (B, 1, H))
    ft = dn.reshape(fmod[:, H:], (B, 1, H))
    y = dn.layer_norm(h, axis=-1) * (fs + 1.0) + ft

    if cfg.head == "noise":
        # x0-parametrized internals behind the eps interface: the head
        # predicts the clean window (plus a conditioning-gated passthrough
        # of the noisy input), and the returned noise estimate is
        # assembled with the schedule coefficients.  An eps-only head
        # cannot transmit conditioning at high noise levels: the implied
        # clean estimate divides the head error by sqrt(alpha_bar_k).
        skip = dn.reshape(_linear(cond, W, "out_skip.w", "out_skip.b"), (B, 1, 1, 1))
        x0_net = dn.reshape(_linear(y, W, "head.w", "head.b"), (B, A, cfg.horizon, 2)) + skip * tau
        sqab = dn.leaf("coef_sqab", (B, 1, 1, 1))
        inv_sq1mab = dn.leaf("coef_inv_sq1mab", (B, 1, 1, 1))
        out = (tau - sqab * x0_net) * inv_sq1mab
    else:
        pooled = dn.mean(y, axis=1)
        out = dn.reshape(_mlp_gelu(pooled, W, "vhead.w1", "vhead.b1", "vhead.w2", "vhead.b2"), (B,))
    return out, attn_probes, W


def _weight_shapes(cfg: ModelConfig):
    from .config import weight_spec

    return weight_spec(cfg)


class Denoiser:
    """Weights + cached compiled graphs for one model configuration.

    Weights are immutable from the graph's point of view: they enter as
    bindings, so concurrent forward passes can share them and the trainer
    can swap updated arrays between steps.  The noise head needs the
    schedule's alpha-bar coefficients; the canonical 20-step cosine
    schedule is assumed unless another is supplied.
    """

    def __init__(self, cfg: ModelConfig, weights: Dict[str, np.ndarray], schedule=None):
        from ..sampler.schedule import build_schedule

        self.cfg = cfg
        self.weights = weights
        self.schedule = schedule or build_schedule(20)
        self._graphs: Dict[tuple, tuple] = {}

    def graph(self, batch: int):
        key = ("fwd", batch)
        if key not in self._graphs:
            out, probes, _ = build_denoiser(self.cfg, batch)
            self._graphs[key] = (out, probes)
        return self._graphs[key]

    def _bindings(self, tau, k, cond: ConditionBundle):
        tau = np.asarray(tau)
        dtype = self.weights["embed.w1"].dtype
        binds = {"tau": tau.astype(dtype, copy=False)}
        binds.update({k_: v.astype(dtype, copy=False) for k_, v in cond.bindings().items()})
        binds["t_emb"] = timestep_embedding(k, self.cfg.emb_dim).astype(dtype)
        if np.shape(binds["t_emb"])[0] == 1 and tau.shape[0] > 1:
            binds["t_emb"] = np.repeat(binds["t_emb"], tau.shape[0], axis=0)
        if self.cfg.head == "noise":
            ks = np.broadcast_to(np.atleast_1d(np.asarray(k, dtype=np.intp)), (tau.shape[0],))
            ab = self.schedule.alpha_bar[ks].reshape(-1, 1, 1, 1)
            binds["coef_sqab"] = np.sqrt(ab).astype(dtype)
            binds["coef_inv_sq1mab"] = (1.0 / np.sqrt(1.0 - ab)).astype(dtype)
        binds.update(self.weights)
        return binds

    def predict_noise(self, tau, k, cond: ConditionBundle, check_finite: bool = False) -> np.ndarray:
        """eps_theta(tau_k, k, C); tau (B, A, H, D) normalized."""
        if self.cfg.head != "noise":
            raise ValueError("model head is not a noise head")
        out, _ = self.graph(np.shape(tau)[0])
        return dn.evaluate(out, self._bindings(tau, k, cond), check_finite=check_finite)

    def value(self, tau, k, cond: ConditionBundle, check_finite: bool = False) -> np.ndarray:
        if self.cfg.head != "scalar-value":
            raise ValueError("model head is not a value head")
        out, _ = self.graph(np.shape(tau)[0])
        return dn.evaluate(out, self._bindings(tau, k, cond), check_finite=check_finite)

    def value_gradient(self, tau, k, cond: ConditionBundle):
        """(values (B,), d(sum of values)/d(tau)) for value-model guidance."""
        key = ("vsum", np.shape(tau)[0])
        if key not in self._graphs:
            out, _, _ = build_denoiser(self.cfg, np.shape(tau)[0])
            self._graphs[key] = (dn.sum_(out), None)
        expr, _ = self._graphs[key]
        val, grads = dn.value_and_gradient(expr, ["tau"], self._bindings(tau, k, cond), check_finite=False)
        return val, grads["tau"]
