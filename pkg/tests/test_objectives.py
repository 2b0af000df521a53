import numpy as np
import pytest

from playdiff import diffnum as dn
from playdiff.madit import ConditionBundle, Denoiser, init_weights, preset
from playdiff.objectives import (
    CompositeObjective,
    DSLObjective,
    DslError,
    GeneratorError,
    PitchControlConfig,
    RuleObjective,
    RuleParams,
    dsl_eval,
    dsl_parse,
    external_program_hook,
    make_hook,
    objective_presets,
    pcv_score,
    pitch_control_field,
    pretty_print,
    render_prompt,
    rule_score,
    team_mask,
)
from playdiff.objectives.dsl import compile_program
from playdiff.sampler import build_schedule


def paths(seed=0, H=4, lo=40.0, hi=65.0):
    rng = np.random.default_rng(seed)
    ball = rng.uniform(lo, hi, (H, 1, 2))
    team = rng.uniform(lo, hi, (H, 11, 2))
    opp = rng.uniform(lo, hi, (H, 11, 2))
    return ball, team, opp


def support_fixture(H=5):
    ball = np.tile([[50.0, 34.0]], (H, 1))[:, None, :]
    team = np.zeros((H, 11, 2))
    team[:, 0] = [52.0, 34.0]
    team[:, 1] = [48.0, 34.0]
    team[:, 2] = [60.0, 34.0]
    for j in range(3, 11):
        team[:, j] = [75.0 + j, 34.0]
    return ball, team


SUPPORT_DSL = """let d = dist(team_pos, ball_pos) in
let m = topk_mask(d, 3) in
- sum(relu(d - 8.0) * m, all) / (sum(m, all) + 0.000001)"""

COMPACT_DSL = """let d = dist(team_pos, ball_pos) in
let m = topk_mask(d, 3) in
let mx = sum(x(team_pos) * m, agents) / 3.0 in
let my = sum(y(team_pos) * m, agents) / 3.0 in
- mean(sum((x(team_pos) - mx) * (x(team_pos) - mx) * m, agents) / 3.0
     + sum((y(team_pos) - my) * (y(team_pos) - my) * m, agents) / 3.0, frames)"""

ZONE14_DSL = """let dx = relu(88.0 - x(team_pos)) + relu(x(team_pos) - 100.0) in
let dy = relu(22.0 - y(team_pos)) + relu(y(team_pos) - 46.0) in
- mean(min(sqrt(dx * dx + dy * dy + 0.000000001), agents), frames)"""


class TestRuleFixtures:
    def test_support_minus_two_thirds(self):
        ball, team = support_fixture()
        assert rule_score(RuleObjective("support"), ball, team) == pytest.approx(-2.0 / 3.0, abs=1e-6)

    def test_compact_minus_eight_thirds(self):
        H = 5
        ball = np.tile([[0.0, 0.0]], (H, 1))[:, None, :]
        team = np.zeros((H, 11, 2))
        team[:, 1] = [2.0, 0.0]
        team[:, 2] = [4.0, 0.0]
        for j in range(3, 11):
            team[:, j] = [60.0 + j, 50.0]
        assert rule_score(RuleObjective("compact"), ball, team) == pytest.approx(-8.0 / 3.0, abs=1e-9)

    def test_zone14_fixtures(self):
        H = 4
        ball = np.tile([[50.0, 34.0]], (H, 1))[:, None, :]
        team = np.tile([[20.0, 10.0]], (11, 1))[None].repeat(H, 0)
        team[:, 0] = [85.0, 34.0]
        assert rule_score(RuleObjective("zone14"), ball, team) == pytest.approx(-3.0, abs=1e-4)
        team[:, 0] = [94.0, 34.0]
        assert abs(rule_score(RuleObjective("zone14"), ball, team)) < 1e-3

    def test_spread_is_negated_compact(self):
        ball, team, _ = paths(3)
        a = rule_score(RuleObjective("compact"), ball, team)
        b = rule_score(RuleObjective("spread"), ball, team)
        assert a == -b

    def test_deep_defending_prefers_deeper(self):
        ball = np.tile([[60.0, 34.0]], (3, 1))[:, None, :]
        deep = np.tile([[30.0, 30.0]], (11, 1))[None].repeat(3, 0)
        high = np.tile([[80.0, 30.0]], (11, 1))[None].repeat(3, 0)
        rule = RuleObjective("deep_defending")
        assert rule_score(rule, ball, deep) > rule_score(rule, ball, high)

    def test_pass_lane_block_prefers_defender_on_lane(self):
        H = 2
        ball = np.tile([[30.0, 34.0]], (H, 1))[:, None, :]
        opp = np.tile([[50.0, 34.0]], (11, 1))[None].repeat(H, 0)
        on_lane = np.tile([[40.0, 34.0]], (11, 1))[None].repeat(H, 0)
        off_lane = np.tile([[40.0, 10.0]], (11, 1))[None].repeat(H, 0)
        rule = RuleObjective("pass_lane_block")
        assert rule_score(rule, ball, on_lane, opp) > rule_score(rule, ball, off_lane, opp)

    def test_pass_lane_block_requires_opponents(self):
        ball, team, _ = paths(1)
        with pytest.raises(ValueError, match="oppos"):
            rule_score(RuleObjective("pass_lane_block"), ball, team)

    def test_topk_clamps_to_team_size(self):
        ball, team, _ = paths(2)
        small = team[:, :2]
        score = rule_score(RuleObjective("compact", RuleParams(top_k=5)), ball, small)
        assert np.isfinite(score)

    def test_reference_transcription_bit_compatible(self):
        """support/compact/zone14 vs a direct gather-based transcription."""

        def ref_support(ball, team):
            d = np.linalg.norm(team - ball, axis=-1)
            idx = np.argsort(d, axis=-1, kind="stable")[:, :3]
            m = np.zeros_like(d)
            np.put_along_axis(m, idx, 1.0, axis=-1)
            excess = np.maximum(d - 8.0, 0.0)
            return -(excess * m).sum() / (m.sum() + 1e-6)

        def ref_compact(ball, team):
            d = np.linalg.norm(team - ball, axis=-1)
            sel = np.take_along_axis(team, np.argsort(d, kind="stable")[:, :3, None], axis=1)
            return -(sel[..., 0].var(1) + sel[..., 1].var(1)).mean()

        def ref_zone14(ball, team):
            x, y = team[..., 0], team[..., 1]
            dx = np.maximum(88.0 - x, 0) + np.maximum(x - 100.0, 0)
            dy = np.maximum(22.0 - y, 0) + np.maximum(y - 46.0, 0)
            return -np.sqrt(dx * dx + dy * dy + 1e-9).min(1).mean()

        rng = np.random.default_rng(0)
        for trial in range(100):
            ball = rng.uniform(0, 100, (3, 1, 2))
            team = rng.uniform(0, 100, (3, 11, 2))
            assert abs(rule_score(RuleObjective("support"), ball, team) - ref_support(ball, team)) < 1e-9
            assert abs(rule_score(RuleObjective("compact"), ball, team) - ref_compact(ball, team)) < 1e-9
            assert abs(rule_score(RuleObjective("zone14"), ball, team) - ref_zone14(ball, team)) < 1e-9


class TestPitchControl:
    def test_mirrored_teams_half_control(self):
        rng = np.random.default_rng(0)
        att = np.stack([rng.uniform(0, 105, (3, 11)), rng.uniform(0, 68, (3, 11))], -1)
        deff = np.stack([105.0 - att[..., 0], 68.0 - att[..., 1]], -1)
        assert pcv_score(att, deff) == pytest.approx(0.5, abs=1e-9)
        assert pcv_score(att, deff, side="defending") == pytest.approx(0.5, abs=1e-9)

    def test_control_sums_to_one(self):
        rng = np.random.default_rng(1)
        att = rng.uniform(0, 105, (11, 2)) * [1, 68 / 105]
        deff = rng.uniform(0, 105, (11, 2)) * [1, 68 / 105]
        f = pitch_control_field(att, deff) + pitch_control_field(deff, att)
        assert np.allclose(f, 1.0)

    def test_remote_defenders_yield_high_control(self):
        att = np.tile([[52.5, 34.0]], (2, 11, 1)) + np.random.default_rng(2).normal(0, 12, (2, 11, 2))
        deff = np.full((2, 11, 2), 3000.0)
        assert pcv_score(att, deff) > 0.9

    def test_single_attacker_local_dominance(self):
        att = np.tile([[52.5, 34.0]], (1, 1, 1))
        deff = np.full((1, 1, 2), 4000.0)
        field = pitch_control_field(att[0], deff[0])
        assert field[12, 8] > 0.95

    def test_rotation_invariance_with_side_swap(self):
        rng = np.random.default_rng(3)
        att = np.stack([rng.uniform(0, 105, (2, 11)), rng.uniform(0, 68, (2, 11))], -1)
        deff = np.stack([rng.uniform(0, 105, (2, 11)), rng.uniform(0, 68, (2, 11))], -1)
        rot = lambda p: np.stack([105.0 - p[..., 0], 68.0 - p[..., 1]], -1)
        a = pcv_score(att, deff)
        b = pcv_score(rot(deff), rot(att), side="defending")
        assert a == pytest.approx(b, abs=1e-9)

    def test_gradient_passes(self):
        rng = np.random.default_rng(4)
        att = dn.leaf("att", (1, 2, 5, 2))
        deff = dn.leaf("def", (1, 2, 5, 2))
        from playdiff.objectives.pitchcontrol import build_pcv_score

        f = dn.sum_(build_pcv_score(att, deff, PitchControlConfig()))
        binds = {"att": rng.uniform(35, 70, (1, 2, 5, 2)), "def": rng.uniform(35, 70, (1, 2, 5, 2))}
        assert dn.grad_check(f, binds, step=1e-3) < 1e-4

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            PitchControlConfig(grid_x=4)
        with pytest.raises(ValueError):
            PitchControlConfig(radius=-1)


class TestDsl:
    def test_spec_example_parses_scalar(self):
        p = dsl_parse("mean(delta(mean(x(team_pos), agents)), frames)")
        assert pretty_print(p) == "mean(delta(mean(x(team_pos), agents)), frames)"

    def test_syntax_error_position(self):
        with pytest.raises(DslError, match=r"1:6"):
            dsl_parse("relu(")

    def test_round_trip_identity(self):
        sources = [
            SUPPORT_DSL,
            COMPACT_DSL,
            ZONE14_DSL,
            "1 - 2 - 3 / (4 * 5)",
            "-(1 + 2) * mean(x(team_pos))",
            "let a = mean(team_pos) in a * a",
        ]
        for src in sources:
            p = dsl_parse(src)
            assert dsl_parse(pretty_print(p)).tree == p.tree

    def test_constant_program(self):
        score, grad = dsl_eval(dsl_parse("1.0"), np.zeros((4, 1, 2)), np.zeros((4, 11, 2)))
        assert score == 1.0 and np.array_equal(grad, np.zeros((4, 11, 2)))

    def test_support_transcription_bit_for_bit(self):
        prog = dsl_parse(SUPPORT_DSL)
        ball, team = support_fixture()
        score, _ = dsl_eval(prog, ball, team)
        assert score == rule_score(RuleObjective("support"), ball, team)
        assert score == pytest.approx(-2.0 / 3.0, abs=1e-6)

    def test_transcriptions_match_rules_on_random_fixtures(self):
        progs = {
            "support": dsl_parse(SUPPORT_DSL),
            "compact": dsl_parse(COMPACT_DSL),
            "zone14": dsl_parse(ZONE14_DSL),
        }
        rng = np.random.default_rng(1)
        for _ in range(100):
            ball = rng.uniform(0, 100, (3, 1, 2))
            team = rng.uniform(0, 100, (3, 11, 2))
            for rid, prog in progs.items():
                want = rule_score(RuleObjective(rid), ball, team)
                got, _ = dsl_eval(prog, ball, team)
                assert abs(got - want) < 1e-9, rid

    def test_negative_corpus_rejected_with_positions(self):
        bad = [
            "relu(",
            "mean(team_pos,, all)",
            "topk_mask(team_pos, 3)",
            "x(mean(team_pos, all))",
            "team_pos + delta(team_pos)",
            "let let = 1 in let",
            "unknownfn(1)",
            "1 +",
            "(1",
            "mean(x(team_pos), agents) extra",
            "topk_mask(dist(team_pos, ball_pos), 0)",
            "team_pos",
        ]
        for src in bad:
            with pytest.raises(DslError, match=r"\d+:\d+"):
                dsl_parse(src)

    def test_nonfinite_evaluation_reported(self):
        prog = dsl_parse("1.0 / mean(x(team_pos), all)")
        with pytest.raises(DslError, match="evaluation failed"):
            dsl_eval(prog, np.zeros((2, 1, 2)), np.zeros((2, 11, 2)))

    def test_random_program_gradients(self):
        from playdiff.objectives.dslgen import checkable_program

        rng = np.random.default_rng(0)
        for i in range(10):
            prog, src, ball, team = checkable_program(rng)
            ballL = dn.leaf("ball_pos", (1,) + ball.shape)
            teamL = dn.leaf("team_pos", (1,) + team.shape)
            f = dn.sum_(compile_program(prog, ballL, teamL))
            err = dn.grad_check(f, {"ball_pos": ball[None], "team_pos": team[None]}, wrt=["team_pos"])
            assert err < 1e-4, f"{src}: {err}"


class TestPromptAndHook:
    def test_render_includes_pitch_and_team(self):
        out = render_prompt("defending", "press the ball carrier")
        assert "105" in out and "68" in out
        assert "defending" in out and "press the ball carrier" in out
        assert "{guided_team}" not in out and "{your_objective}" not in out

    def test_stub_generator_round_trip(self, tmp_path):
        prog_file = tmp_path / "prog.txt"
        prog_file.write_text("mean(x(team_pos), all)")
        import sys

        cmd = f"{sys.executable} -c \"import sys; sys.stdout.write(open('{prog_file}').read())\""
        prog = external_program_hook("push forward", "attacking", generator_command=cmd)
        assert pretty_print(prog) == "mean(x(team_pos), all)"

    def test_stub_generator_malformed_output(self):
        import sys

        cmd = f"{sys.executable} -c \"print('relu(')\""
        with pytest.raises(GeneratorError, match=r"\d+:\d+"):
            external_program_hook("push", "attacking", generator_command=cmd)

    def test_program_file_fallback(self, tmp_path):
        f = tmp_path / "p.dsl"
        f.write_text("- mean(dist(team_pos, ball_pos), all)")
        prog = external_program_hook("stay close", "defending", program_path=f)
        assert "dist" in pretty_print(prog)

    def test_no_generator_errors(self, monkeypatch):
        monkeypatch.delenv("PLAYDIFF_DSL_GENERATOR", raising=False)
        with pytest.raises(GeneratorError, match="PLAYDIFF_DSL_GENERATOR"):
            external_program_hook("x", "attacking")


class TestHooks:
    def setup_method(self):
        self.cfg = preset("micro")
        self.den = Denoiser(self.cfg, init_weights(self.cfg, 1))
        self.sched = build_schedule(20)
        rng = np.random.default_rng(0)
        self.cond = ConditionBundle(
            rng.uniform(-1, 1, (2, 22, 10, 2)),
            rng.uniform(-1, 1, (2, 10, 2)),
            np.eye(30)[[0, 3]],
            rng.normal(size=(2, 5)),
        )
        self.tau = rng.normal(size=(2, 23, 64, 2)) * 0.5

    def test_team_mask_zeroes_others(self):
        hook = make_hook(RuleObjective("support"), "attacking", self.den, self.sched)
        g, _ = hook(self.tau, 5, self.cond)
        assert np.abs(g[:, 11:]).max() == 0.0

    def test_composite_weight_identity(self):
        comp = CompositeObjective(((RuleObjective("support"), 1.0), (RuleObjective("zone14"), 0.0)))
        single = make_hook(RuleObjective("support"), "attacking", self.den, self.sched)
        combo = make_hook(comp, "attacking", self.den, self.sched)
        g1, s1 = single(self.tau, 4, self.cond)
        g2, s2 = combo(self.tau, 4, self.cond)
        assert np.allclose(g1, g2, atol=1e-12) and s1 == pytest.approx(s2)

    def test_composition_linearity(self):
        o1, w1 = RuleObjective("support"), 0.7
        o2, w2 = RuleObjective("zone14"), 1.3
        h1 = make_hook(o1, "attacking", self.den, self.sched)
        h2 = make_hook(o2, "attacking", self.den, self.sched)
        hc = make_hook(CompositeObjective(((o1, w1), (o2, w2))), "attacking", self.den, self.sched)
        g1, s1 = h1(self.tau, 6, self.cond)
        g2, s2 = h2(self.tau, 6, self.cond)
        gc, sc = hc(self.tau, 6, self.cond)
        assert np.allclose(gc, w1 * g1 + w2 * g2, atol=1e-4)
        assert sc == pytest.approx(w1 * s1 + w2 * s2, rel=1e-5)

    def test_linear_dsl_pushes_positive_x(self):
        hook = make_hook(DSLObjective(dsl_parse("mean(x(team_pos), all)")), "attacking", self.den, self.sched, kind="dsl")
        g, _ = hook(self.tau, 8, self.cond)
        assert g[:, :11, :, 0].sum() > 0

    def test_estimate_clean_chain_gradcheck(self):
        hook = make_hook(RuleObjective("zone14"), "attacking", self.den, self.sched)
        total, _ = hook._build_dps(1)
        binds = hook._bindings(self.tau[:1].astype(np.float64), 5, self.cond.take(slice(0, 1)))
        binds = {k: np.asarray(v, dtype=np.float64) for k, v in binds.items()}
        err = dn.grad_check(total, binds, wrt=["tau"])
        assert err < 1e-4, err

    def test_value_hook_sign_flip(self):
        vcfg = preset("micro", head="scalar-value")
        vmodel = Denoiser(vcfg, init_weights(vcfg, 3))
        for k, v in vmodel.weights.items():  # give the head real weights
            vmodel.weights[k] = np.random.default_rng(abs(hash(k)) % 2**31).normal(0, 0.05, v.shape).astype(np.float32)
        ha = make_hook(vmodel, "attacking", self.den, self.sched)
        hd = make_hook(vmodel, "defending", self.den, self.sched)
        _, sa = ha(self.tau, 5, self.cond)
        _, sd = hd(self.tau, 5, self.cond)
        assert sa == pytest.approx(-sd)

    def test_value_sign_exact_negation(self):
        vcfg = preset("micro", head="scalar-value")
        w = {k: np.random.default_rng(abs(hash(k)) % 2**31).normal(0, 0.05, s).astype(np.float64)
             for k, s in __import__("playdiff.madit.config", fromlist=["weight_spec"]).weight_spec(vcfg).items()}
        vmodel = Denoiser(vcfg, w)
        from playdiff.objectives.hooks import ValueGuidanceHook

        ha = ValueGuidanceHook(vmodel, "attacking")
        hd = ValueGuidanceHook(vmodel, "defending")
        ga, _ = ha(self.tau, 5, self.cond)
        gd, _ = hd(self.tau, 5, self.cond)
        _, raw = vmodel.value_gradient(self.tau, np.full(2, 5), self.cond)
        assert np.allclose(ga, raw * ha.agent_mask[None, :, None, None], atol=1e-12)
        assert np.allclose(gd, -raw * hd.agent_mask[None, :, None, None], atol=1e-12)

    def test_presets_exist(self):
        presets = objective_presets()
        assert {"attacking_rules", "defending_rules", "attacking_pcv", "defending_pcv"} <= set(presets)


class TestTrainValue:
    def test_constant_return_regression(self):
        """A constant-return dataset converges to that constant."""
        from playdiff.objectives import ValueModelSpec, train_value
        from playdiff.pitchdata import SimulatorConfig, simulate_match, window_from_record
        from playdiff.sampler import build_schedule

        episodes = simulate_match(SimulatorConfig(seed=4, half_duration_s=60.0), 0, 4)
        pairs = []
        for ep in episodes:
            for rec in ep.records:
                try:
                    pairs.append((window_from_record(rec), rec))
                except ValueError:
                    pass
        targets = np.full(len(pairs), 0.6)
        spec = ValueModelSpec(config=preset("micro", head="scalar-value"), steps=1200, batch=16, lr=2e-3, seed=0)
        model, history = train_value(pairs, targets, spec, build_schedule(20))
        w, rec = pairs[0]
        v = float(model.value(w.positions[None], np.ones(1), __import__("playdiff.madit", fromlist=["condition_from_record"]).condition_from_record(w, rec, spec.config))[0])
        assert abs(v - 0.6) < 0.05
        assert np.mean(history[-20:]) < history[0]

    def test_empty_team_rejected(self):
        with pytest.raises(ValueError, match="empty team"):
            rule_score(RuleObjective("support"), np.zeros((3, 1, 2)), np.zeros((3, 0, 2)))
