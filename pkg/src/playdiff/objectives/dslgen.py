"""Random guidance-program generator for gradient verification.

Grows well-typed expression trees over the DSL grammar and pairs them
with inputs kept away from non-differentiable points (relu/min/max kinks,
top-k ties), where central differences are meaningless.
"""

from __future__ import annotations

import numpy as np

from .. import diffnum as dn
from .dsl import BinOp, Call, GuidanceProgram, Let, Num, Var, compile_program, dsl_parse, pretty_print

_H = 6  # frames used by generated fixtures


def _scalarize(rng, expr_src: str, shape) -> str:
    """Reduce an expression of known (frames, agents) shape to a scalar."""
    fr, ag = shape
    src = expr_src
    if ag != 1:
        op = rng.choice(["mean", "sum", "var"])
        src = f"{op}({src}, agents)"
    if fr != 1:
        op = rng.choice(["mean", "sum", "max"])
        src = f"{op}({src}, frames)"
    return src


def random_program(rng: np.random.Generator):
    """One random scalar program (parsed) plus its source text."""
    base = rng.choice(
        [
            "dist(team_pos, ball_pos)",
            "norm(team_pos - ball_pos)",
            "x(team_pos)",
            "y(team_pos)",
            "x(team_pos) * y(team_pos)",
        ]
    )
    src = base
    for _ in range(int(rng.integers(1, 4))):
        kind = rng.choice(["relu", "sqrt", "affine", "mask", "mix"])
        if kind == "relu":
            c = round(float(rng.uniform(10, 60)), 3)
            src = f"relu({src} - {c})"
        elif kind == "sqrt":
            src = f"sqrt(({src}) * ({src}) + 0.5)"
        elif kind == "affine":
            a = round(float(rng.uniform(0.2, 2.0)), 3)
            b = round(float(rng.uniform(-5, 5)), 3)
            src = f"{a} * ({src}) + {b}"
        elif kind == "mask":
            k = int(rng.integers(2, 5))
            src = f"({src}) * topk_mask(dist(team_pos, ball_pos), {k})"
        else:
            # centered square (variance-like): nonlinear, so later linear
            # reductions cannot cancel it analytically
            src = f"(({src}) - mean({src}, agents)) * (({src}) - mean({src}, agents))"
    scalar = _scalarize(rng, src, ("H", 11))
    if rng.random() < 0.5:
        scalar = f"let s = {scalar} in s * s / 100.0 + 1.0"
    if rng.random() < 0.3:
        scalar = f"{scalar} + var(delta(mean(x(team_pos), agents)), frames)"
    program = dsl_parse(scalar)
    return program, scalar


def _kink_margin(program: GuidanceProgram, ball, team) -> float:
    """Smallest distance of any relu input or top-k boundary from its kink."""
    ballL = dn.leaf("ball_pos", (1,) + ball.shape)
    teamL = dn.leaf("team_pos", (1,) + team.shape)
    root = compile_program(program, ballL, teamL)
    from ..diffnum.core import _compile, _forward_pass

    nodes, arg_idx = _compile(root)
    vals = _forward_pass(nodes, arg_idx, {"ball_pos": ball[None], "team_pos": team[None]}, False)
    margin = np.inf
    for node, val in zip(nodes, vals):
        if node.op == "relu":
            margin = min(margin, float(np.min(np.abs(vals[arg_idx[nodes.index(node)][0]]))))
        elif node.op in ("min", "max"):
            arg = vals[arg_idx[nodes.index(node)][0]]
            axis = node.meta[0]
            if axis is None or np.shape(arg)[axis] < 2:
                continue
            srt = np.sort(arg, axis=axis)
            gap = np.take(srt, 1, axis=axis) - np.take(srt, 0, axis=axis) if node.op == "min" else np.take(srt, -1, axis=axis) - np.take(srt, -2, axis=axis)
            margin = min(margin, float(np.min(np.abs(gap))))
        elif node.op == "topk_mask":
            arg = vals[arg_idx[nodes.index(node)][0]]
            k, axis, _ = node.meta
            n = np.shape(arg)[axis]
            if k < n:
                srt = np.sort(arg, axis=axis)
                gap = np.take(srt, k, axis=axis) - np.take(srt, k - 1, axis=axis)
                margin = min(margin, float(np.min(np.abs(gap))))
    return margin


def well_conditioned_paths(program: GuidanceProgram, rng: np.random.Generator, min_margin: float = 1e-3):
    """Random (ball, team) paths whose kink margins exceed ``min_margin``.

    Central differences are only meaningful away from subgradient points;
    inputs too close to a relu kink or a selection tie are resampled.
    """
    for _ in range(200):
        ball = rng.uniform(30, 75, (_H, 1, 2))
        team = rng.uniform(25, 80, (_H, 11, 2))
        if _kink_margin(program, ball, team) > min_margin:
            return ball, team
    raise RuntimeError(f"could not condition inputs for program: {pretty_print(program)}")


def _fd_compatible(program: GuidanceProgram, ball, team) -> bool:
    """True when central differences can resolve every gradient component.

    Finite-difference noise scales like |f| * eps / step, so components
    whose analytic gradient is a cancellation residue (nonzero but below
    |f| * 1e-6) can never be verified; structural zeros (the graph ignores
    the coordinate, both sides are exactly 0) are fine.
    """
    ballL = dn.leaf("ball_pos", (1,) + ball.shape)
    teamL = dn.leaf("team_pos", (1,) + team.shape)
    f = dn.sum_(compile_program(program, ballL, teamL))
    binds = {"ball_pos": ball[None], "team_pos": team[None]}
    value, grads = dn.value_and_gradient(f, ["team_pos"], binds)
    g = np.abs(grads["team_pos"])
    if not np.isfinite(value) or abs(float(value)) > 1e4:
        return False
    floor = max(1e-6, abs(float(value)) * 1e-6)
    tiny = (g > 0) & (g < floor)
    return not tiny.any() and g.max() > floor


def checkable_program(rng: np.random.Generator):
    """A random program plus inputs on which finite differences are valid."""
    for _ in range(200):
        program, src = random_program(rng)
        try:
            ball, team = well_conditioned_paths(program, rng)
        except RuntimeError:
            continue  # structurally degenerate draw (constant region, tie)
        if _fd_compatible(program, ball, team):
            return program, src, ball, team
    raise RuntimeError("could not draw a checkable program")
