"""Team-masked guidance hooks: objectives wired through the denoiser.

Path objectives (rules, DSL programs, pitch control, composites) are
evaluated on the clean-trajectory estimate: the hook reconstructs
tau0_hat from the noisy window through the denoiser, denormalizes to
meters, scores the objective and differentiates the whole chain back to
the noisy input.  The value objective instead differentiates the value
model directly on the noisy window.  Returned gradients are zeroed
outside the guided team's agent rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .. import diffnum as dn
from ..madit.model import ConditionBundle, Denoiser, build_denoiser, timestep_embedding
from ..pitchdata.pitch import BALL_INDEX, HALF_LENGTH, HALF_WIDTH, normalize
from .dsl import GuidanceProgram, compile_program
from .pitchcontrol import PitchControlConfig, build_pcv_score
from .rules import RuleObjective

#: Default guidance scales per objective family.
DEFAULT_SCALES = {"rule": 1.0, "composite": 1.0, "dsl": 1.0, "value": 5.0}


@dataclass(frozen=True)
class DSLObjective:
    program: GuidanceProgram

    @property
    def name(self) -> str:
        return "dsl"

    def build(self, ball, team, opp=None):
        return compile_program(self.program, ball, team)


@dataclass(frozen=True)
class PCVObjective:
    config: PitchControlConfig = field(default_factory=PitchControlConfig)

    @property
    def name(self) -> str:
        return "pcv"

    def build(self, ball, team, opp=None):
        if opp is None:
            raise ValueError("pcv requires the opposing team's path")
        return build_pcv_score(team, opp, self.config)


@dataclass(frozen=True)
class CompositeObjective:
    items: tuple  # ((objective, weight), ...)

    def __post_init__(self):
        for _, w in self.items:
            if w < 0:
                raise ValueError("composite weights must be >= 0")

    @property
    def name(self) -> str:
        return "composite(" + "+".join(o.name for o, _ in self.items) + ")"

    def build(self, ball, team, opp=None):
        total = None
        for obj, w in self.items:
            term = obj.build(ball, team, opp) * float(w)
            total = term if total is None else total + term
        if total is None:
            raise ValueError("composite objective has no items")
        return total


def split_paths(meters_expr, guided_team: str):
    """(ball, team, opp) rank-4 (B, H, N, 2) paths from a (B, A, H, D) window."""
    def agents(lo, hi):
        return dn.transpose(meters_expr[:, lo:hi], (0, 2, 1, 3))

    ball = agents(BALL_INDEX, BALL_INDEX + 1)
    attackers = agents(0, 11)
    defenders = agents(11, 22)
    if guided_team == "attacking":
        return ball, attackers, defenders
    if guided_team == "defending":
        return ball, defenders, attackers
    raise ValueError(f"guided team must be 'attacking' or 'defending', got {guided_team!r}")


def team_mask(guided_team: str, agents: int = 23) -> np.ndarray:
    mask = np.zeros(agents)
    if guided_team == "attacking":
        mask[0:11] = 1.0
    elif guided_team == "defending":
        mask[11:22] = 1.0
    else:
        raise ValueError(f"guided team must be 'attacking' or 'defending', got {guided_team!r}")
    return mask


class GuidanceHook:
    """Callable (tau_k, k, cond) -> (gradient, mean score) with an agent mask."""

    def __init__(self, objective, guided_team: str, denoiser: Denoiser, schedule, kind: str = "rule"):
        self.objective = objective
        self.guided_team = guided_team
        self.denoiser = denoiser
        self.schedule = schedule
        self.kind = kind
        self.agent_mask = team_mask(guided_team)
        self.name = f"{objective.name}[{guided_team}]"
        self.default_scale = DEFAULT_SCALES.get(kind, 1.0)
        self._graphs: Dict[int, tuple] = {}
        self._score_graphs: Dict[tuple, dn.DiffExpr] = {}

    # -- graph construction ------------------------------------------------
    def _build_dps(self, batch: int):
        eps_hat, _, W = build_denoiser(self.denoiser.cfg, batch)
        tau = next(iter(e for e in _collect_leaves(eps_hat) if e.meta == "tau"))
        sq1mab = dn.leaf("dps_sq1mab", ())
        isqab = dn.leaf("dps_isqab", ())
        tau0 = (tau - sq1mab * eps_hat) * isqab
        meters = tau0 * dn.const(np.array([HALF_LENGTH, HALF_WIDTH], dtype=np.float32)) + dn.const(
            np.array([HALF_LENGTH, HALF_WIDTH], dtype=np.float32)
        )
        ball, team, opp = split_paths(meters, self.guided_team)
        scores = self.objective.build(ball, team, opp)
        return dn.sum_(scores), scores

    def _bindings(self, tau, k: int, cond: ConditionBundle):
        dtype = self.denoiser.weights["embed.w1"].dtype
        binds = {"tau": np.asarray(tau).astype(dtype, copy=False)}
        binds.update({k_: v.astype(dtype, copy=False) for k_, v in cond.bindings().items()})
        binds["t_emb"] = timestep_embedding(np.full(np.shape(tau)[0], k), self.denoiser.cfg.emb_dim).astype(dtype)
        binds.update(self.denoiser.weights)
        ab = self.schedule.alpha_bar[k]
        binds["dps_sq1mab"] = np.asarray(np.sqrt(1.0 - ab), dtype=dtype)
        binds["dps_isqab"] = np.asarray(1.0 / np.sqrt(ab), dtype=dtype)
        if self.denoiser.cfg.head == "noise":
            shaped = np.full((np.shape(tau)[0], 1, 1, 1), ab)
            binds["coef_sqab"] = np.sqrt(shaped).astype(dtype)
            binds["coef_inv_sq1mab"] = (1.0 / np.sqrt(1.0 - shaped)).astype(dtype)
        return binds

    # -- hook protocol -------------------------------------------------------
    def __call__(self, tau_k, k: int, cond: ConditionBundle):
        B = np.shape(tau_k)[0]
        if B not in self._graphs:
            self._graphs[B] = self._build_dps(B)
        total, _scores = self._graphs[B]
        value, grads = dn.value_and_gradient(total, ["tau"], self._bindings(tau_k, k, cond), check_finite=False)
        grad = grads["tau"] * self.agent_mask[None, :, None, None]
        return grad, float(value) / B

    def score_meters(self, window_meters, cond: Optional[ConditionBundle] = None) -> float:
        """Objective value of one denormalized (A, H, D) window."""
        key = ("score", 1)
        if key not in self._score_graphs:
            win = dn.leaf("win_m", (1, 23, self.denoiser.cfg.horizon, 2))
            ball, team, opp = split_paths(win, self.guided_team)
            self._score_graphs[key] = self.objective.build(ball, team, opp)
        expr = self._score_graphs[key]
        out = dn.evaluate(expr, {"win_m": np.asarray(window_meters, dtype=np.float64)[None]})
        return float(out[0])


class ValueGuidanceHook:
    """Direct value-model guidance: gradient of V on the noisy window."""

    def __init__(self, value_model: Denoiser, guided_team: str):
        if value_model.cfg.head != "scalar-value":
            raise ValueError("value guidance needs a scalar-value head model")
        self.value_model = value_model
        self.guided_team = guided_team
        self.sign = 1.0 if guided_team == "attacking" else -1.0
        self.agent_mask = team_mask(guided_team)
        self.name = f"value[{guided_team}]"
        self.kind = "value"
        self.default_scale = DEFAULT_SCALES["value"]

    def __call__(self, tau_k, k: int, cond: ConditionBundle):
        B = np.shape(tau_k)[0]
        vsum, grad = self.value_model.value_gradient(tau_k, np.full(B, k), cond)
        grad = self.sign * grad * self.agent_mask[None, :, None, None]
        return grad, self.sign * float(vsum) / B

    def score_meters(self, window_meters, cond: Optional[ConditionBundle] = None) -> float:
        if cond is None:
            raise ValueError("value guidance scores need the condition bundle")
        tau = normalize(window_meters)[None]
        v = self.value_model.value(tau, np.ones(1), cond.take(slice(0, 1)))
        return self.sign * float(v[0])


def _collect_leaves(expr):
    stack, seen, out = [expr], set(), []
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.op == "leaf":
            out.append(node)
        stack.extend(node.args)
    return out


def make_hook(objective, guided_team: str, denoiser: Denoiser, schedule, kind: Optional[str] = None):
    """Build the team-masked guidance hook for any objective flavor."""
    if isinstance(objective, Denoiser) or kind == "value":
        return ValueGuidanceHook(objective, guided_team)
    if kind is None:
        kind = "composite" if isinstance(objective, CompositeObjective) else (
            "dsl" if isinstance(objective, DSLObjective) else "rule"
        )
    return GuidanceHook(objective, guided_team, denoiser, schedule, kind)


#: Named rule bundles exposed by the service and CLI.
def objective_presets():
    att = CompositeObjective(
        (
            (RuleObjective("support"), 1.0),
            (RuleObjective("spread"), 1.0),
            (RuleObjective("passing_angle_spread"), 1.0),
            (RuleObjective("zone14"), 1.0),
        )
    )
    deff = CompositeObjective(
        (
            (RuleObjective("support"), 1.0),
            (RuleObjective("compact"), 1.0),
            (RuleObjective("deep_defending"), 1.0),
            (RuleObjective("pass_lane_block"), 1.0),
        )
    )
    return {
        "attacking_rules": att,
        "defending_rules": deff,
        "attacking_pcv": PCVObjective(),
        "defending_pcv": PCVObjective(),
    }
