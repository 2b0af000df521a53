import numpy as np
import pytest

from playdiff import diffnum as dn
from playdiff.madit import (
    ConditionBundle,
    Denoiser,
    backbone_parameter_count,
    init_weights,
    load_checkpoint,
    parameter_count,
    preset,
    save_checkpoint,
    weight_spec,
)
from playdiff.madit.config import PRESET_PARAMS_M
from playdiff.madit.model import build_agent_attention, build_denoiser, timestep_embedding


def micro(**kw):
    return preset("micro", **kw)


def bundle(B, cfg, seed=0):
    rng = np.random.default_rng(seed)
    ball_len = cfg.horizon if cfg.ball_mode == "conditional" else cfg.context_len
    return ConditionBundle(
        ctx_players=rng.uniform(-1, 1, (B, 22, cfg.context_len, 2)),
        ctx_ball=rng.uniform(-1, 1, (B, ball_len, 2)),
        action_onehot=np.eye(30)[rng.integers(0, 30, B)],
        global_features=rng.normal(size=(B, cfg.n_global_inputs)),
        ball_mode=cfg.ball_mode,
    )


def random_weights(cfg, seed, scale=0.05, dtype=np.float64):
    rng = np.random.default_rng(seed)
    return {k: rng.normal(0, scale, shape).astype(dtype) for k, shape in weight_spec(cfg).items()}


class TestEmbedding:
    def test_zero_weights_leave_role_embedding(self):
        cfg = micro()
        w = init_weights(cfg, 0)
        for k in ("embed.w1", "embed.w2", "embed.b1", "embed.b2"):
            w[k] = np.zeros_like(w[k])
        den = Denoiser(cfg, w)
        out, _, W = build_denoiser(cfg, 1)
        from playdiff.madit.model import build_trajectory_embedding

        emb, _ = build_trajectory_embedding(dn.leaf("tau", (1, 23, cfg.horizon, 2)), W, cfg)
        binds = {**w, "tau": np.random.default_rng(1).normal(size=(1, 23, cfg.horizon, 2))}
        got = dn.evaluate(emb, binds)
        roles = np.concatenate([np.repeat(w["role.table"][0:1], 11, 0), np.repeat(w["role.table"][1:2], 11, 0), w["role.table"][2:3]])
        assert np.allclose(got[0], roles, atol=1e-7)

    def test_s_preset_embedding_width(self):
        cfg = preset("S")
        assert weight_spec(cfg)["embed.w2"][1] == 32

    def test_same_role_permutation_equivariance(self):
        cfg = micro()
        den = Denoiser(cfg, random_weights(cfg, 3))
        rng = np.random.default_rng(5)
        tau = rng.normal(size=(2, 23, cfg.horizon, 2))
        cond = bundle(2, cfg, 7)
        perm = np.arange(23)
        perm[[1, 6]] = perm[[6, 1]]  # two attackers
        perm[[13, 20]] = perm[[20, 13]]  # two defenders
        cond_p = ConditionBundle(cond.ctx_players[:, perm[:22]], cond.ctx_ball, cond.action_onehot, cond.global_features)
        a = den.predict_noise(tau, np.full(2, 3), cond)
        b = den.predict_noise(tau[:, perm], np.full(2, 3), cond_p)
        assert np.allclose(a[:, perm], b, atol=1e-10)


class TestAttention:
    def test_single_agent_softmax_is_identity(self):
        cfg = micro()
        W = {name: dn.leaf(name, shape) for name, shape in weight_spec(cfg).items()}
        q = dn.leaf("q", (1, 1, cfg.hidden_dim))
        out, att = build_agent_attention(q, q, W, "blk0.sa.", cfg.heads)
        w = random_weights(cfg, 11)
        x = np.random.default_rng(0).normal(size=(1, 1, cfg.hidden_dim))
        got = dn.evaluate(out, {**w, "q": x})
        v = x @ w["blk0.sa.wv"] + w["blk0.sa.bv"]
        want = v @ w["blk0.sa.wo"] + w["blk0.sa.bo"]
        assert np.allclose(got, want, atol=1e-10)

    def test_matches_brute_force_oracle(self):
        cfg = micro(heads=1)
        W = {name: dn.leaf(name, shape) for name, shape in weight_spec(cfg).items()}
        q = dn.leaf("q", (1, 3, cfg.hidden_dim))
        out, att = build_agent_attention(q, q, W, "blk0.sa.", 1)
        w = random_weights(cfg, 13)
        x = np.random.default_rng(1).normal(size=(1, 3, cfg.hidden_dim))
        got = dn.evaluate(out, {**w, "q": x})

        # direct transcription of scaled dot-product attention
        Q = x[0] @ w["blk0.sa.wq"] + w["blk0.sa.bq"]
        K = x[0] @ w["blk0.sa.wk"] + w["blk0.sa.bk"]
        V = x[0] @ w["blk0.sa.wv"] + w["blk0.sa.bv"]
        S = Q @ K.T / np.sqrt(cfg.hidden_dim)
        P = np.exp(S - S.max(1, keepdims=True))
        P /= P.sum(1, keepdims=True)
        want = (P @ V) @ w["blk0.sa.wo"] + w["blk0.sa.bo"]
        assert np.max(np.abs(got[0] - want)) < 1e-10

    def test_identical_rows_in_identical_rows_out(self):
        cfg = micro()
        W = {name: dn.leaf(name, shape) for name, shape in weight_spec(cfg).items()}
        q = dn.leaf("q", (1, 4, cfg.hidden_dim))
        out, _ = build_agent_attention(q, q, W, "blk0.sa.", cfg.heads)
        w = random_weights(cfg, 17)
        row = np.random.default_rng(2).normal(size=cfg.hidden_dim)
        got = dn.evaluate(out, {**w, "q": np.tile(row, (1, 4, 1))})
        assert np.allclose(got[0], got[0, 0], atol=1e-12)

    def test_attention_rows_sum_to_one(self):
        cfg = micro()
        den = Denoiser(cfg, random_weights(cfg, 19))
        out, probes = den.graph(2)
        binds = den._bindings(np.random.default_rng(3).normal(size=(2, 23, cfg.horizon, 2)), np.full(2, 4), bundle(2, cfg))
        for probe in probes:
            att = dn.evaluate(probe, binds)
            assert np.max(np.abs(att.sum(-1) - 1.0)) < 1e-6


class TestContextEncoder:
    def test_output_shape_both_modes(self):
        from playdiff.madit.model import build_context_encoding

        for mode in ("predictive", "conditional"):
            cfg = micro(ball_mode=mode)
            W = {name: dn.leaf(name, shape) for name, shape in weight_spec(cfg).items()}
            enc = build_context_encoding(W, cfg, 2)
            assert enc.shape == (2, 23, cfg.emb_dim)
            got = dn.evaluate(enc, {**random_weights(cfg, 23), **bundle(2, cfg).bindings()})
            assert np.all(np.isfinite(got))

    def test_ball_context_length_follows_mode(self):
        cfg_p = micro(ball_mode="predictive")
        cfg_c = micro(ball_mode="conditional")
        den_p = Denoiser(cfg_p, random_weights(cfg_p, 29))
        den_c = Denoiser(cfg_c, random_weights(cfg_c, 29))
        tau = np.zeros((1, 23, 64, 2))
        den_p.predict_noise(tau, [1], bundle(1, cfg_p))
        den_c.predict_noise(tau, [1], bundle(1, cfg_c))
        with pytest.raises(dn.EvalError, match="ctx_b"):
            den_c.predict_noise(tau, [1], bundle(1, cfg_p))

    def test_identical_agents_identical_rows(self):
        from playdiff.madit.model import build_context_encoding

        cfg = micro()
        W = {name: dn.leaf(name, shape) for name, shape in weight_spec(cfg).items()}
        enc = build_context_encoding(W, cfg, 1)
        w = random_weights(cfg, 31)
        one = np.random.default_rng(4).normal(size=(1, 1, cfg.context_len, 2))
        binds = {**w, "ctx_p": np.tile(one, (1, 22, 1, 1)), "ctx_b": one[:, 0]}
        got = dn.evaluate(enc, binds)
        assert np.allclose(got[0], got[0, 0], atol=1e-10)


class TestEventEncoder:
    def test_ball_destination_widens_inputs(self):
        a = micro(include_ball_destination=False)
        b = micro(include_ball_destination=True)
        assert weight_spec(b)["ev.glob.w1"][0] == weight_spec(a)["ev.glob.w1"][0] + 2

    def test_timestep_embeddings_distinct(self):
        e = timestep_embedding(np.arange(0, 21), 16)
        d = np.linalg.norm(e[:, None] - e[None, :], axis=-1)
        assert d[np.triu_indices(21, 1)].min() > 1e-3

    def test_zero_gate_blocks_are_identity(self):
        cfg = micro()
        w = random_weights(cfg, 37)
        for k in w:  # zero the modulation heads and skip gate, as at init
            if ".ada." in k or k.startswith("final.ada") or k.startswith("out_skip"):
                w[k] = np.zeros_like(w[k])
        w["in_ctx.w"] = np.zeros_like(w["in_ctx.w"])  # isolate the trajectory path
        den = Denoiser(cfg, w)
        rng = np.random.default_rng(5)
        tau = rng.normal(size=(1, 23, cfg.horizon, 2))
        got = den.predict_noise(tau, [2], bundle(1, cfg))

        # expected: head applied to layer-normed projected trajectory embedding
        flat = tau.reshape(1, 23, -1)
        h = np.tanh(0.7978845608028654 * ((flat @ w["embed.w1"] + w["embed.b1"]) * (1 + 0.044715 * (flat @ w["embed.w1"] + w["embed.b1"]) ** 2)))
        inner = flat @ w["embed.w1"] + w["embed.b1"]
        act = 0.5 * inner * (1 + np.tanh(0.7978845608028654 * (inner + 0.044715 * inner**3)))
        emb = act @ w["embed.w2"] + w["embed.b2"]
        roles = np.concatenate([np.repeat(w["role.table"][0:1], 11, 0), np.repeat(w["role.table"][1:2], 11, 0), w["role.table"][2:3]])
        tokens = (emb + roles) @ w["in_proj.w"] + w["in_proj.b"] + flat @ w["in_lift.w"]
        mu = tokens.mean(-1, keepdims=True)
        xc = tokens - mu
        y = xc / np.sqrt((xc * xc).mean(-1, keepdims=True) + 1e-5)
        x0_net = (y @ w["head.w"] + w["head.b"]).reshape(1, 23, cfg.horizon, 2)
        from playdiff.sampler import build_schedule

        ab = build_schedule(20).alpha_bar[2]
        want = (tau - np.sqrt(ab) * x0_net) / np.sqrt(1.0 - ab)
        assert np.max(np.abs(got - want)) < 1e-9


class TestDenoiserForward:
    def test_noise_head_shape_matches_input(self):
        cfg = micro()
        den = Denoiser(cfg, init_weights(cfg, 0))
        tau = np.random.default_rng(0).normal(size=(3, 23, 64, 2))
        assert den.predict_noise(tau, np.full(3, 1), bundle(3, cfg)).shape == tau.shape

    def test_gradient_wrt_input_passes_grad_check(self):
        from playdiff.sampler import build_schedule

        cfg = micro()
        w = random_weights(cfg, 41, scale=0.05)
        out, _, _ = build_denoiser(cfg, 1)
        f = dn.mean(out)
        rng = np.random.default_rng(6)
        ab = build_schedule(20).alpha_bar[3]
        binds = {**w, "tau": rng.normal(size=(1, 23, 64, 2)) * 0.3,
                 "t_emb": timestep_embedding([3], cfg.emb_dim),
                 "coef_sqab": np.full((1, 1, 1, 1), np.sqrt(ab)),
                 "coef_inv_sq1mab": np.full((1, 1, 1, 1), 1.0 / np.sqrt(1.0 - ab)),
                 **bundle(1, cfg).bindings()}
        err = dn.grad_check(f, binds, wrt=["tau"])
        assert err < 1e-4, err

    def test_value_head_scalar_and_permutation_invariant(self):
        cfg = micro(head="scalar-value")
        den = Denoiser(cfg, random_weights(cfg, 43))
        rng = np.random.default_rng(7)
        tau = rng.normal(size=(2, 23, 64, 2))
        cond = bundle(2, cfg)
        v = den.value(tau, np.full(2, 1), cond)
        assert v.shape == (2,)
        perm = np.arange(23)
        perm[[2, 9]] = perm[[9, 2]]
        cond_p = ConditionBundle(cond.ctx_players[:, perm[:22]], cond.ctx_ball, cond.action_onehot, cond.global_features)
        v2 = den.value(tau[:, perm], np.full(2, 1), cond_p)
        assert np.allclose(v, v2, atol=1e-10)

    def test_finite_on_extreme_inputs_after_init(self):
        cfg = preset("S-desk")
        den = Denoiser(cfg, init_weights(cfg, 1))
        tau = np.full((1, 23, 64, 2), 1.1)
        out = den.predict_noise(tau, [20], bundle(1, cfg), check_finite=True)
        assert np.all(np.isfinite(out))


class TestParameterCount:
    @pytest.mark.parametrize("name,target", [("S", 1.74e6), ("L", 30.83e6)])
    def test_within_25pct_of_published(self, name, target):
        got = backbone_parameter_count(preset(name))
        assert abs(got - target) / target < 0.25

    def test_doubling_layers_increases_count(self):
        base = preset("S")
        assert parameter_count(base.with_(layers=4)) > parameter_count(base)

    def test_count_matches_actual_arrays(self):
        cfg = micro()
        w = init_weights(cfg, 0)
        assert parameter_count(cfg) == sum(a.size for a in w.values())


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = micro(ball_mode="conditional")
        w = init_weights(cfg, 5)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, w, cfg, extra={"step": 7})
        w2, cfg2, extra = load_checkpoint(path)
        assert cfg2 == cfg and extra["step"] == 7
        assert set(w2) == set(w)
        for k in w:
            assert np.array_equal(w[k], w2[k]) and w[k].dtype == w2[k].dtype

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.ckpt"
        p.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(p)
