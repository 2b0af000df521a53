"""Guidance DSL: a small differentiable expression language over paths.

Programs see two inputs, ``ball_pos`` (frames x 1 x xy) and ``team_pos``
(frames x 11 x xy), and must evaluate to a scalar score (higher is
better).  The builtin catalog mirrors the rule objectives' vocabulary:

    dist(a, b) norm(a) relu(a) sqrt(a) topk_mask(a, k)
    mean(a[, axis]) var(a[, axis]) sum(a[, axis]) min(a[, axis]) max(a[, axis])
    delta(a) x(a) y(a)    with axis one of: frames, agents, all

plus ``+ - * /``, unary minus, numeric literals, parentheses and
``let name = expr in body``.  Reductions default to ``all``.  Shapes are
inferred per node; every error carries a 1-based line:column position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .. import diffnum as dn

AXES = ("frames", "agents", "all")
_AX_FRAMES, _AX_AGENTS, _AX_COORDS = 1, 2, 3  # rank-4 layout: (batch, F, A, C)


class DslError(ValueError):
    """Lexical, syntax, arity or shape error with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


# -- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    line: int = field(compare=False, default=1)
    col: int = field(compare=False, default=1)


@dataclass(frozen=True)
class Num(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Var(Node):
    name: str = ""


@dataclass(frozen=True)
class Neg(Node):
    operand: Node = None


@dataclass(frozen=True)
class BinOp(Node):
    op: str = "+"
    left: Node = None
    right: Node = None


@dataclass(frozen=True)
class Call(Node):
    fn: str = ""
    args: tuple = ()
    axis: Optional[str] = None
    k: Optional[int] = None


@dataclass(frozen=True)
class Let(Node):
    name: str = ""
    value: Node = None
    body: Node = None


@dataclass(frozen=True)
class GuidanceProgram:
    """Parsed, shape-checked program plus its source text."""

    source: str
    tree: Node


# -- Lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[()+\-*/,=])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(src: str):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if not m:
            raise DslError(f"unexpected character {src[i]!r}", line, col)
        text = m.group(0)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# -- Parser -----------------------------------------------------------------

FUNCTIONS = {
    "dist": 2,
    "norm": 1,
    "relu": 1,
    "sqrt": 1,
    "topk_mask": 2,
    "mean": 1,
    "var": 1,
    "sum": 1,
    "min": 1,
    "max": 1,
    "delta": 1,
    "x": 1,
    "y": 1,
}
_REDUCTIONS = ("mean", "var", "sum", "min", "max")


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def eat(self, kind=None, text=None) -> Token:
        t = self.cur
        if (kind and t.kind != kind) or (text and t.text != text):
            want = text or kind
            raise DslError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        self.i += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        t = self.cur
        if t.kind != "eof":
            raise DslError(f"unexpected trailing input {t.text!r}", t.line, t.col)
        return node

    def expr(self) -> Node:
        if self.cur.kind == "ident" and self.cur.text == "let":
            t = self.eat("ident")
            name_tok = self.eat("ident")
            if name_tok.text in FUNCTIONS or name_tok.text in ("let", "in") or name_tok.text in AXES:
                raise DslError(f"cannot bind reserved name {name_tok.text!r}", name_tok.line, name_tok.col)
            self.eat("sym", "=")
            value = self.expr()
            in_tok = self.eat("ident")
            if in_tok.text != "in":
                raise DslError(f"expected 'in', found {in_tok.text!r}", in_tok.line, in_tok.col)
            body = self.expr()
            return Let(t.line, t.col, name_tok.text, value, body)
        return self.additive()

    def additive(self) -> Node:
        node = self.multiplicative()
        while self.cur.kind == "sym" and self.cur.text in "+-":
            op = self.eat("sym")
            rhs = self.multiplicative()
            node = BinOp(op.line, op.col, op.text, node, rhs)
        return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while self.cur.kind == "sym" and self.cur.text in "*/":
            op = self.eat("sym")
            rhs = self.unary()
            node = BinOp(op.line, op.col, op.text, node, rhs)
        return node

    def unary(self) -> Node:
        if self.cur.kind == "sym" and self.cur.text == "-":
            t = self.eat("sym")
            return Neg(t.line, t.col, self.unary())
        return self.primary()

    def primary(self) -> Node:
        t = self.cur
        if t.kind == "num":
            self.eat("num")
            return Num(t.line, t.col, float(t.text))
        if t.kind == "sym" and t.text == "(":
            self.eat("sym", "(")
            node = self.expr()
            self.eat("sym", ")")
            return node
        if t.kind == "ident":
            self.eat("ident")
            if self.cur.kind == "sym" and self.cur.text == "(":
                return self.call(t)
            return Var(t.line, t.col, t.text)
        raise DslError(f"expected expression, found {t.text or 'end of input'!r}", t.line, t.col)

    def call(self, name_tok: Token) -> Node:
        fn = name_tok.text
        if fn not in FUNCTIONS:
            raise DslError(f"unknown function {fn!r}", name_tok.line, name_tok.col)
        self.eat("sym", "(")
        args, axis, k = [], None, None
        while True:
            t = self.cur
            if t.kind == "ident" and t.text in AXES and fn in _REDUCTIONS:
                self.eat("ident")
                axis = t.text
            elif fn == "topk_mask" and len(args) == 1:
                num = self.eat("num")
                if "." in num.text or "e" in num.text.lower():
                    raise DslError("topk_mask expects an integer k", num.line, num.col)
                k = int(num.text)
                if k < 1:
                    raise DslError("topk_mask expects k >= 1", num.line, num.col)
            else:
                args.append(self.expr())
            if self.cur.kind == "sym" and self.cur.text == ",":
                self.eat("sym", ",")
                continue
            break
        close = self.eat("sym", ")")
        if fn == "topk_mask" and k is None:
            raise DslError("topk_mask expects a literal integer k as its second argument", close.line, close.col)
        want = FUNCTIONS[fn]
        have = len(args) + (1 if k is not None else 0)
        if fn in _REDUCTIONS:
            if len(args) != 1:
                raise DslError(f"{fn} expects 1 expression argument, got {len(args)}", name_tok.line, name_tok.col)
        elif have != want:
            raise DslError(f"{fn} expects {want} argument(s), got {have}", name_tok.line, name_tok.col)
        return Call(name_tok.line, name_tok.col, fn, tuple(args), axis, k)


def dsl_parse(text: str) -> GuidanceProgram:
    """Parse and shape-check a program; the result must be scalar."""
    tree = _Parser(_lex(text)).parse()
    shape = _infer(tree, {"ball_pos": ("H", 1, 2), "team_pos": ("H", 11, 2)})
    if shape != (1, 1, 1):
        raise DslError(
            f"program must reduce to a scalar, got axes (frames={shape[0]}, agents={shape[1]}, xy={shape[2]})",
            tree.line,
            tree.col,
        )
    return GuidanceProgram(source=text, tree=tree)


# -- Shape inference --------------------------------------------------------
# Shapes are (frames, agents, coords) with 1 for collapsed axes; the frames
# entry is the symbol "H" (full horizon) or "H-1" (after delta).


def _infer(node: Node, env) -> tuple:
    if isinstance(node, Num):
        return (1, 1, 1)
    if isinstance(node, Var):
        if node.name not in env:
            raise DslError(f"unknown identifier {node.name!r}", node.line, node.col)
        return env[node.name]
    if isinstance(node, Neg):
        return _infer(node.operand, env)
    if isinstance(node, Let):
        val = _infer(node.value, env)
        return _infer(node.body, {**env, node.name: val})
    if isinstance(node, BinOp):
        ls = _infer(node.left, env)
        rs = _infer(node.right, env)
        out = []
        for axis, (a, b) in enumerate(zip(ls, rs)):
            if a == b or b == 1:
                out.append(a)
            elif a == 1:
                out.append(b)
            else:
                raise DslError(
                    f"operands of {node.op!r} disagree on axis {('frames', 'agents', 'xy')[axis]}: {a} vs {b}",
                    node.line,
                    node.col,
                )
        return tuple(out)
    if isinstance(node, Call):
        shapes = [_infer(a, env) for a in node.args]
        return _infer_call(node, shapes)
    raise AssertionError(f"unhandled node {node}")


def _infer_call(node: Call, shapes) -> tuple:
    fn = node.fn

    def need_coords(s):
        if s[2] != 2:
            raise DslError(f"{fn} needs xy coordinates, got a coordinate-free value", node.line, node.col)

    if fn == "dist":
        a, b = shapes
        need_coords(a)
        need_coords(b)
        if a[0] == b[0] or b[0] == 1:
            fr = a[0]
        elif a[0] == 1:
            fr = b[0]
        else:
            raise DslError("dist operands disagree on frames", node.line, node.col)
        if a[1] == b[1] or b[1] == 1:
            ag = a[1]
        elif a[1] == 1:
            ag = b[1]
        else:
            raise DslError("dist operands disagree on agents", node.line, node.col)
        return (fr, ag, 1)
    if fn == "norm":
        need_coords(shapes[0])
        return (shapes[0][0], shapes[0][1], 1)
    if fn in ("relu", "sqrt"):
        return shapes[0]
    if fn == "topk_mask":
        s = shapes[0]
        if s[1] == 1:
            raise DslError("topk_mask needs an agents axis", node.line, node.col)
        if s[2] != 1:
            raise DslError("topk_mask expects a coordinate-free value (use dist/norm/x/y first)", node.line, node.col)
        return s
    if fn in _REDUCTIONS:
        s = shapes[0]
        axis = node.axis or "all"
        if axis == "all":
            return (1, 1, 1)
        if axis == "frames":
            if s[0] == 1:
                raise DslError(f"{fn} over frames needs a frames axis", node.line, node.col)
            return (1, s[1], s[2])
        if s[1] == 1:
            raise DslError(f"{fn} over agents needs an agents axis", node.line, node.col)
        return (s[0], 1, s[2])
    if fn == "delta":
        s = shapes[0]
        if s[0] in (1,):
            raise DslError("delta needs a frames axis", node.line, node.col)
        return ("H-1", s[1], s[2])
    if fn in ("x", "y"):
        need_coords(shapes[0])
        return (shapes[0][0], shapes[0][1], 1)
    raise AssertionError(fn)


# -- Pretty printer ---------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def _pp(node: Node, parent_prec: int = 0) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _pp(node.operand, 3)
        out = f"-{inner}"
        return f"({out})" if parent_prec > 2 else out
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left = _pp(node.left, prec)
        right = _pp(node.right, prec + 1)  # left-assoc
        out = f"{left} {node.op} {right}"
        return f"({out})" if prec < parent_prec else out
    if isinstance(node, Call):
        parts = [_pp(a) for a in node.args]
        if node.k is not None:
            parts.append(str(node.k))
        if node.axis is not None:
            parts.append(node.axis)
        return f"{node.fn}({', '.join(parts)})"
    if isinstance(node, Let):
        out = f"let {node.name} = {_pp(node.value)} in {_pp(node.body)}"
        return f"({out})" if parent_prec > 0 else out
    raise AssertionError(node)


def pretty_print(program: GuidanceProgram) -> str:
    return _pp(program.tree)


# -- Compiler to diffnum ----------------------------------------------------


def compile_program(program: GuidanceProgram, ball_expr: dn.DiffExpr, team_expr: dn.DiffExpr) -> dn.DiffExpr:
    """Lower a program onto rank-4 (batch, frames, agents, xy) expressions.

    Returns a (batch,)-shaped score expression.
    """
    out = _compile(program.tree, {"ball_pos": ball_expr, "team_pos": team_expr})
    b = out.shape[0]
    n = out.shape[1] * out.shape[2] * out.shape[3]
    if n != 1:  # pragma: no cover - guarded by dsl_parse shape check
        raise ValueError(f"program is not scalar per batch: {out.shape}")
    return dn.reshape(out, (b,))


def _compile(node: Node, env) -> dn.DiffExpr:
    if isinstance(node, Num):
        batch = env["ball_pos"].shape[0]
        return dn.broadcast_to(dn.reshape(dn.const(float(node.value)), (1, 1, 1, 1)), (batch, 1, 1, 1))
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_compile(node.operand, env)
    if isinstance(node, Let):
        return _compile(node.body, {**env, node.name: _compile(node.value, env)})
    if isinstance(node, BinOp):
        left = _compile(node.left, env)
        right = _compile(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    if isinstance(node, Call):
        return _compile_call(node, env)
    raise AssertionError(node)


def _compile_call(node: Call, env) -> dn.DiffExpr:
    fn = node.fn
    args = [_compile(a, env) for a in node.args]
    if fn == "dist":
        d = args[0] - args[1]
        return dn.reshape(dn.l2_norm(d), d.shape[:3] + (1,))
    if fn == "norm":
        return dn.reshape(dn.l2_norm(args[0]), args[0].shape[:3] + (1,))
    if fn == "relu":
        return dn.relu(args[0])
    if fn == "sqrt":
        return dn.sqrt(args[0])
    if fn == "topk_mask":
        return dn.topk_mask(args[0], node.k, axis=_AX_AGENTS)
    if fn in _REDUCTIONS:
        a = args[0]
        axis = node.axis or "all"
        op = {"mean": dn.mean, "var": dn.var, "sum": dn.sum_, "min": dn.min_, "max": dn.max_}[fn]
        if axis == "all":
            flat = dn.reshape(a, (a.shape[0], a.shape[1] * a.shape[2] * a.shape[3]))
            red = op(flat, axis=1, keepdims=True)
            return dn.reshape(red, (a.shape[0], 1, 1, 1))
        ax = _AX_FRAMES if axis == "frames" else _AX_AGENTS
        return op(a, axis=ax, keepdims=True)
    if fn == "delta":
        return dn.frame_diff(args[0], axis=_AX_FRAMES)
    if fn == "x":
        return args[0][:, :, :, 0:1]
    if fn == "y":
        return args[0][:, :, :, 1:2]
    raise AssertionError(fn)


def dsl_eval(program: GuidanceProgram, ball_path, team_path):
    """Evaluate a program on numpy paths; returns (score, d(score)/d(team)).

    Paths are meters, shaped (H, 1, 2) and (H, 11, 2).
    """
    ball = dn.leaf("ball_pos", (1,) + np.shape(ball_path))
    team = dn.leaf("team_pos", (1,) + np.shape(team_path))
    score = compile_program(program, ball, team)
    binds = {"ball_pos": np.asarray(ball_path, dtype=np.float64)[None], "team_pos": np.asarray(team_path, dtype=np.float64)[None]}
    try:
        value, grads = dn.value_and_gradient(dn.sum_(score), ["team_pos"], binds)
    except dn.EvalError as exc:
        raise DslError(f"evaluation failed: {exc}", 1, 1) from exc
    return float(value), grads["team_pos"][0]
