"""Built-in differentiable rule objectives over trajectory paths.

Every rule maps (ball path, team path[, opponent path]) to a scalar where
higher is better, built as a diffnum graph so gradients reach the player
positions.  Paths are rank-4 ``(batch, frames, agents, xy)`` in meters;
the ball has a singleton agent axis.  Constants follow the reference
guidance-function semantics (support threshold 8 m, top-3 selections,
zone bounds x in [88, 100], y in [22, 46], 1e-6 / 1e-9 stabilizers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import diffnum as dn

AXIS_FRAMES, AXIS_AGENTS, AXIS_COORDS = 1, 2, 3

RULE_IDS = (
    "support",
    "compact",
    "spread",
    "passing_angle_spread",
    "zone14",
    "deep_defending",
    "pass_lane_block",
    "pcv",
)

#: Rules whose graph needs the opposing team's path as well.
NEEDS_OPPONENTS = ("pass_lane_block", "pcv")


@dataclass(frozen=True)
class RuleParams:
    max_support_dist: float = 8.0
    top_k: int = 3
    zone_x: tuple = (88.0, 100.0)
    zone_y: tuple = (22.0, 46.0)
    lane_temperature: float = 1.0  # meters, soft-min over defenders


def _ball_distance(ball, team):
    """(B, H, N) distances from each team agent to the ball."""
    return dn.l2_norm(team - ball)


def _clamp01(t):
    return dn.relu(t) - dn.relu(t - 1.0)


def build_support(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Penalize the top-k nearest players drifting past the support radius."""
    d = _ball_distance(ball, team)
    mask = dn.topk_mask(d, p.top_k, axis=AXIS_AGENTS)
    excess = dn.relu(d - p.max_support_dist)
    k_frames = dn.sum_(mask, axis=(AXIS_FRAMES, AXIS_AGENTS)) + 1e-6
    return -dn.sum_(excess * mask, axis=(AXIS_FRAMES, AXIS_AGENTS)) / k_frames


def _masked_variance(values, mask, k):
    """Population variance of the masked k entries along the agent axis."""
    sel_mean = dn.sum_(values * mask, axis=AXIS_AGENTS, keepdims=True) / float(k)
    dev = (values - sel_mean) * mask
    return dn.sum_(dev * dev, axis=AXIS_AGENTS) / float(k)


def build_compact(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Negative positional variance of the k players nearest to the ball."""
    n = team.shape[AXIS_AGENTS]
    k = min(max(p.top_k, 1), n)
    d = _ball_distance(ball, team)
    mask = dn.topk_mask(d, k, axis=AXIS_AGENTS)
    var_x = _masked_variance(team[:, :, :, 0], mask, k)
    var_y = _masked_variance(team[:, :, :, 1], mask, k)
    return -dn.mean(var_x + var_y, axis=AXIS_FRAMES)


def build_spread(ball, team, opp=None, p: RuleParams = RuleParams()):
    return -build_compact(ball, team, opp, p)


def build_zone14(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Distance of the nearest player to the zone-14 rectangle, negated."""
    x = team[:, :, :, 0]
    y = team[:, :, :, 1]
    dx = dn.relu(p.zone_x[0] - x) + dn.relu(x - p.zone_x[1])
    dy = dn.relu(p.zone_y[0] - y) + dn.relu(y - p.zone_y[1])
    dist = dn.sqrt(dx * dx + dy * dy + 1e-9)
    return -dn.mean(dn.min_(dist, axis=AXIS_AGENTS), axis=AXIS_FRAMES)


def build_passing_angle_spread(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Negative circular-resultant length of the top-k bearings from the ball."""
    n = team.shape[AXIS_AGENTS]
    k = min(max(p.top_k, 1), n)
    delta = team - ball
    d = dn.l2_norm(delta)
    unit = delta / dn.reshape(d + 1e-6, d.shape + (1,))
    mask = dn.topk_mask(d, k, axis=AXIS_AGENTS)
    mean_dir = dn.sum_(unit * dn.reshape(mask, mask.shape + (1,)), axis=AXIS_AGENTS) / float(k)
    return -dn.mean(dn.l2_norm(mean_dir), axis=AXIS_FRAMES)


def build_deep_defending(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Penalize defenders positioned beyond (to the right of) the ball."""
    depth = dn.relu(team[:, :, :, 0] - ball[:, :, :, 0])
    return -dn.mean(depth, axis=(AXIS_FRAMES, AXIS_AGENTS))


def build_pass_lane_block(ball, team, opp=None, p: RuleParams = RuleParams()):
    """Keep some defender close to each ball-to-opponent passing lane.

    For the top-k opponents nearest the ball, the perpendicular distance
    of the closest defender to the lane segment is penalized; closeness is
    a soft-min (temperature in meters) so gradients reach every defender.
    """
    if opp is None:
        raise ValueError("pass_lane_block requires the opposing team's path")
    n_opp = opp.shape[AXIS_AGENTS]
    k = min(max(p.top_k, 1), n_opp)
    d_opp = _ball_distance(ball, opp)
    lane_mask = dn.topk_mask(d_opp, k, axis=AXIS_AGENTS)  # (B, H, No)

    # pairwise defender-to-segment distances: axes (B, H, def, lane)
    a = dn.reshape(ball, (ball.shape[0], ball.shape[1], 1, 1, 2))
    b = dn.reshape(opp, (opp.shape[0], opp.shape[1], 1, opp.shape[2], 2))
    q = dn.reshape(team, (team.shape[0], team.shape[1], team.shape[2], 1, 2))
    ab = b - a
    denom = dn.sum_(ab * ab, axis=4, keepdims=True) + 1e-9
    t = _clamp01(dn.sum_((q - a) * ab, axis=4, keepdims=True) / denom)
    proj = a + t * ab
    dist = dn.l2_norm(q - proj)  # (B, H, Nd, No)

    w = dn.softmax(-dist / p.lane_temperature, axis=2)
    closest = dn.sum_(w * dist, axis=2)  # (B, H, No)
    pen = dn.sum_(closest * lane_mask, axis=AXIS_AGENTS) / float(k)
    return -dn.mean(pen, axis=AXIS_FRAMES)


_BUILDERS = {
    "support": build_support,
    "compact": build_compact,
    "spread": build_spread,
    "passing_angle_spread": build_passing_angle_spread,
    "zone14": build_zone14,
    "deep_defending": build_deep_defending,
    "pass_lane_block": build_pass_lane_block,
}


@dataclass(frozen=True)
class RuleObjective:
    """One catalog rule plus its parameters."""

    rule_id: str
    params: RuleParams = field(default_factory=RuleParams)

    def __post_init__(self):
        if self.rule_id not in RULE_IDS:
            raise ValueError(f"unknown rule {self.rule_id!r}; choose from {RULE_IDS}")

    @property
    def name(self) -> str:
        return self.rule_id

    def build(self, ball, team, opp=None):
        if self.rule_id == "pcv":
            from .pitchcontrol import PitchControlConfig, build_pcv_score

            if opp is None:
                raise ValueError("pcv requires the opposing team's path")
            return build_pcv_score(team, opp, PitchControlConfig())
        return _BUILDERS[self.rule_id](ball, team, opp, self.params)


def rule_score(rule: RuleObjective, ball_path, team_path, opp_path=None) -> float:
    """Evaluate one rule on numpy paths (meters, (H,1,2) / (H,N,2))."""
    if np.shape(team_path)[1] == 0:
        raise ValueError("rule_score: empty team")
    ball = dn.leaf("ball", (1,) + np.shape(ball_path))
    team = dn.leaf("team", (1,) + np.shape(team_path))
    binds = {"ball": np.asarray(ball_path)[None], "team": np.asarray(team_path)[None]}
    opp = None
    if opp_path is not None:
        opp = dn.leaf("opp", (1,) + np.shape(opp_path))
        binds["opp"] = np.asarray(opp_path)[None]
    expr = rule.build(ball, team, opp)
    return float(dn.evaluate(expr, binds)[0])
