"""Reverse-mode autodiff over dense numpy arrays.

Expressions are built symbolically from named leaves and constants, then
evaluated (or differentiated) against a dict of bindings.  The same graph
can be re-evaluated with fresh bindings, so model graphs are built once
and reused across training steps and sampling chains.

Shapes are inferred and checked at graph-build time; evaluation re-checks
leaf bindings against declared shapes.  All functions here are pure:
identical bindings produce bit-identical outputs.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import special as _sp  # noqa: F401  (expit)

__all__ = [
    "DiffExpr",
    "ShapeError",
    "EvalError",
    "leaf",
    "const",
    "evaluate",
    "gradient",
]


class ShapeError(ValueError):
    """Operand shapes incompatible with an operation."""


class EvalError(RuntimeError):
    """Evaluation failed (missing binding, non-finite intermediate, ...)."""


def _normalize_axis(axis, ndim, op):
    if axis is None:
        return None
    if isinstance(axis, (tuple, list)):
        return tuple(_normalize_axis(a, ndim, op) for a in axis)
    if not -ndim <= axis < ndim:
        raise ShapeError(f"{op}: axis {axis} out of range for {ndim}-d operand")
    return axis % ndim if ndim else 0


def _broadcast_shapes(a, b, op):
    try:
        return np.broadcast_shapes(a, b)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a} and {b}") from None


def _reduced_shape(shape, axis, keepdims):
    if axis is None:
        return tuple(1 for _ in shape) if keepdims else ()
    axes = axis if isinstance(axis, tuple) else (axis,)
    if keepdims:
        return tuple(1 if i in axes else s for i, s in enumerate(shape))
    return tuple(s for i, s in enumerate(shape) if i not in axes)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class DiffExpr:
    """One node of an expression graph.

    ``op`` names the operation, ``args`` are operand expressions and
    ``meta`` holds static parameters (axis, slice key, leaf name, ...).
    ``shape`` is inferred at construction.
    """

    __slots__ = ("op", "args", "meta", "shape", "_compiled")

    def __init__(self, op, args=(), meta=None, shape=()):
        self.op = op
        self.args = tuple(args)
        self.meta = meta
        self.shape = tuple(shape)
        self._compiled = None

    def __repr__(self):
        if self.op == "leaf":
            return f"leaf({self.meta!r}, shape={self.shape})"
        return f"{self.op}{self.shape}"

    @property
    def ndim(self):
        return len(self.shape)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def leaf(name: str, shape: Sequence[int]) -> DiffExpr:
    return DiffExpr("leaf", (), name, tuple(int(s) for s in shape))


def const(value) -> DiffExpr:
    if isinstance(value, DiffExpr):
        return value
    arr = np.asarray(value)
    if arr.ndim == 0:
        # Scalars stay python floats so numpy's weak promotion keeps the
        # operand dtype (float32 graphs must not silently upcast).
        return DiffExpr("const", (), float(arr), ())
    return DiffExpr("const", (), arr, arr.shape)


def _as_expr(x) -> DiffExpr:
    return x if isinstance(x, DiffExpr) else const(x)


# ---------------------------------------------------------------------------
# Op constructors.  Each infers the output shape and validates operands.
# ---------------------------------------------------------------------------


def _binary(op, a, b):
    a, b = _as_expr(a), _as_expr(b)
    return DiffExpr(op, (a, b), None, _broadcast_shapes(a.shape, b.shape, op))


def add(a, b) -> DiffExpr:
    return _binary("add", a, b)


def sub(a, b) -> DiffExpr:
    return _binary("sub", a, b)


def mul(a, b) -> DiffExpr:
    return _binary("mul", a, b)


def div(a, b) -> DiffExpr:
    return _binary("div", a, b)


def neg(a) -> DiffExpr:
    a = _as_expr(a)
    return DiffExpr("neg", (a,), None, a.shape)


def matmul(a, b) -> DiffExpr:
    a, b = _as_expr(a), _as_expr(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ for {a.shape} and {b.shape}")
    batch = _broadcast_shapes(a.shape[:-2], b.shape[:-2], "matmul")
    return DiffExpr("matmul", (a, b), None, batch + (a.shape[-2], b.shape[-1]))


def _unary(op, a):
    a = _as_expr(a)
    return DiffExpr(op, (a,), None, a.shape)


def exp(a) -> DiffExpr:
    return _unary("exp", a)


def log(a) -> DiffExpr:
    return _unary("log", a)


def sqrt(a) -> DiffExpr:
    return _unary("sqrt", a)


def relu(a) -> DiffExpr:
    return _unary("relu", a)


def gelu(a) -> DiffExpr:
    """Gaussian error linear unit (tanh approximation)."""
    return _unary("gelu", a)


def sigmoid(a) -> DiffExpr:
    return _unary("sigmoid", a)


def softmax(a, axis: int = -1) -> DiffExpr:
    a = _as_expr(a)
    return DiffExpr("softmax", (a,), _normalize_axis(axis, a.ndim, "softmax"), a.shape)


def layer_norm(a, axis: int = -1, eps: float = 1e-5) -> DiffExpr:
    a = _as_expr(a)
    return DiffExpr("layer_norm", (a,), (_normalize_axis(axis, a.ndim, "layer_norm"), float(eps)), a.shape)


def _reduce(op, a, axis, keepdims):
    a = _as_expr(a)
    axis = _normalize_axis(axis, a.ndim, op)
    return DiffExpr(op, (a,), (axis, bool(keepdims)), _reduced_shape(a.shape, axis, keepdims))


def sum_(a, axis=None, keepdims=False) -> DiffExpr:
    return _reduce("sum", a, axis, keepdims)


def mean(a, axis=None, keepdims=False) -> DiffExpr:
    return _reduce("mean", a, axis, keepdims)


def var(a, axis=None, keepdims=False) -> DiffExpr:
    """Population variance (matches ``np.var`` with ddof=0)."""
    return _reduce("var", a, axis, keepdims)


def min_(a, axis=None, keepdims=False) -> DiffExpr:
    a = _as_expr(a)
    axis = _normalize_axis(axis, a.ndim, "min")
    if isinstance(axis, tuple):
        raise ShapeError("min: only a single axis (or None) is supported")
    return DiffExpr("min", (a,), (axis, bool(keepdims)), _reduced_shape(a.shape, axis, keepdims))


def max_(a, axis=None, keepdims=False) -> DiffExpr:
    a = _as_expr(a)
    axis = _normalize_axis(axis, a.ndim, "max")
    if isinstance(axis, tuple):
        raise ShapeError("max: only a single axis (or None) is supported")
    return DiffExpr("max", (a,), (axis, bool(keepdims)), _reduced_shape(a.shape, axis, keepdims))


def concatenate(parts: Iterable[DiffExpr], axis: int = 0) -> DiffExpr:
    parts = [_as_expr(p) for p in parts]
    if not parts:
        raise ShapeError("concatenate: no operands")
    axis = _normalize_axis(axis, parts[0].ndim, "concatenate")
    base = list(parts[0].shape)
    total = 0
    for p in parts:
        if p.ndim != len(base):
            raise ShapeError(f"concatenate: rank mismatch {parts[0].shape} vs {p.shape}")
        for i, (s0, s1) in enumerate(zip(base, p.shape)):
            if i != axis and s0 != s1:
                raise ShapeError(f"concatenate: shapes {parts[0].shape} and {p.shape} differ off axis {axis}")
        total += p.shape[axis]
    base[axis] = total
    return DiffExpr("concatenate", tuple(parts), axis, tuple(base))


def slice_(a, key) -> DiffExpr:
    """Basic (static) slicing; integer and slice components only."""
    a = _as_expr(a)
    if not isinstance(key, tuple):
        key = (key,)
    for k in key:
        if not isinstance(k, (int, slice)) and k is not Ellipsis:
            raise ShapeError(f"slice: unsupported key component {k!r}")
    out_shape = np.empty(a.shape, dtype=np.uint8)[key].shape
    return DiffExpr("slice", (a,), key, out_shape)


def reshape(a, shape) -> DiffExpr:
    a = _as_expr(a)
    shape = tuple(int(s) for s in shape)
    if math.prod(shape) != math.prod(a.shape):
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {shape}")
    return DiffExpr("reshape", (a,), shape, shape)


def transpose(a, axes) -> DiffExpr:
    a = _as_expr(a)
    axes = tuple(int(x) % a.ndim for x in axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation for shape {a.shape}")
    return DiffExpr("transpose", (a,), axes, tuple(a.shape[i] for i in axes))


def broadcast_to(a, shape) -> DiffExpr:
    a = _as_expr(a)
    shape = tuple(int(s) for s in shape)
    _broadcast_shapes(a.shape, shape, "broadcast_to")
    if np.broadcast_shapes(a.shape, shape) != shape:
        raise ShapeError(f"broadcast_to: {a.shape} does not broadcast to {shape}")
    return DiffExpr("broadcast_to", (a,), shape, shape)


def gather(a, indices, axis: int) -> DiffExpr:
    """take_along_axis with integer indices; no gradient flows to indices."""
    a, indices = _as_expr(a), _as_expr(indices)
    axis = _normalize_axis(axis, a.ndim, "gather")
    if indices.ndim != a.ndim:
        raise ShapeError(f"gather: indices rank {indices.shape} must match operand {a.shape}")
    out = list(indices.shape)
    for i, (sa, si) in enumerate(zip(a.shape, indices.shape)):
        if i != axis and si != sa and si != 1 and sa != 1:
            raise ShapeError(f"gather: shapes {a.shape} / {indices.shape} differ off axis {axis}")
        if i != axis:
            out[i] = max(sa, si)
    return DiffExpr("gather", (a, indices), axis, tuple(out))


def topk_mask(a, k: int, axis: int = -1, largest: bool = False) -> DiffExpr:
    """0/1 mask of the k smallest (or largest) entries along ``axis``.

    The selection is a constant: no gradient flows through the mask, only
    through values multiplied by it downstream.  Ties break by stable
    index order, and k is clamped to the axis length.
    """
    a = _as_expr(a)
    axis = _normalize_axis(axis, a.ndim, "topk_mask")
    if k < 1:
        raise ShapeError(f"topk_mask: k must be >= 1, got {k}")
    return DiffExpr("topk_mask", (a,), (int(k), axis, bool(largest)), a.shape)


def l2_norm(a) -> DiffExpr:
    """Euclidean norm over the last axis (subgradient 0 at the origin)."""
    a = _as_expr(a)
    if a.ndim < 1:
        raise ShapeError("l2_norm: operand must have at least one axis")
    return DiffExpr("l2_norm", (a,), None, a.shape[:-1])


def frame_diff(a, axis: int = 0) -> DiffExpr:
    """Successive differences x[t+1] - x[t] along ``axis``."""
    a = _as_expr(a)
    axis = _normalize_axis(axis, a.ndim, "frame_diff")
    if a.shape[axis] < 2:
        raise ShapeError(f"frame_diff: axis {axis} of {a.shape} is too short")
    shape = list(a.shape)
    shape[axis] -= 1
    return DiffExpr("frame_diff", (a,), axis, tuple(shape))


# ---------------------------------------------------------------------------
# Forward kernels.
# ---------------------------------------------------------------------------


def _fw_softmax(x, axis):
    z = x - np.max(x, axis=axis, keepdims=True)
    # floor keeps exp() out of subnormal territory (x86 slow path); the
    # clipped weights are < 2e-35 and never observable at test tolerances
    e = np.exp(np.maximum(z, -80.0))
    return e / np.sum(e, axis=axis, keepdims=True)


def _fw_layer_norm(x, axis, eps):
    mu = np.mean(x, axis=axis, keepdims=True)
    xc = x - mu
    v = np.mean(xc * xc, axis=axis, keepdims=True)
    return xc / np.sqrt(v + eps)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def _fw_gelu(x):
    # tanh approximation; scipy's erf path upcasts float32 and is ~10x slower
    u = np.multiply(x, x)
    u *= _GELU_A
    u += 1.0
    u *= x
    u *= _GELU_C
    np.tanh(u, out=u)
    u += 1.0
    u *= x
    u *= 0.5
    return u


def _fw_topk_mask(x, k, axis, largest):
    n = x.shape[axis]
    kk = min(k, n)
    order = np.argsort(-x if largest else x, axis=axis, kind="stable")
    idx = np.take(order, np.arange(kk), axis=axis)
    mask = np.zeros_like(x)
    np.put_along_axis(mask, idx, 1.0, axis=axis)
    return mask


def _fw_gather(x, idx, axis):
    return np.take_along_axis(x, idx.astype(np.intp), axis=axis)


_FORWARD = {
    "add": lambda n, a, b: a + b,
    "sub": lambda n, a, b: a - b,
    "mul": lambda n, a, b: a * b,
    "div": lambda n, a, b: a / b,
    "neg": lambda n, a: -a,
    "matmul": lambda n, a, b: a @ b,
    "exp": lambda n, a: np.exp(a),
    "log": lambda n, a: np.log(a),
    "sqrt": lambda n, a: np.sqrt(a),
    "relu": lambda n, a: np.maximum(a, 0),
    "gelu": lambda n, a: _fw_gelu(a),
    "sigmoid": lambda n, a: _sp.expit(a),
    "softmax": lambda n, a: _fw_softmax(a, n.meta),
    "layer_norm": lambda n, a: _fw_layer_norm(a, *n.meta),
    "sum": lambda n, a: np.sum(a, axis=n.meta[0], keepdims=n.meta[1]),
    "mean": lambda n, a: np.mean(a, axis=n.meta[0], keepdims=n.meta[1]),
    "var": lambda n, a: np.var(a, axis=n.meta[0], keepdims=n.meta[1]),
    "min": lambda n, a: np.min(a, axis=n.meta[0], keepdims=n.meta[1]),
    "max": lambda n, a: np.max(a, axis=n.meta[0], keepdims=n.meta[1]),
    "concatenate": lambda n, *parts: np.concatenate(parts, axis=n.meta),
    "slice": lambda n, a: a[n.meta],
    "reshape": lambda n, a: np.reshape(a, n.meta),
    "transpose": lambda n, a: np.transpose(a, n.meta),
    "broadcast_to": lambda n, a: np.broadcast_to(a, n.meta),
    "gather": lambda n, a, i: _fw_gather(a, i, n.meta),
    "topk_mask": lambda n, a: _fw_topk_mask(a, *n.meta),
    "l2_norm": lambda n, a: np.sqrt(np.sum(a * a, axis=-1)),
    "frame_diff": lambda n, a: np.diff(a, axis=n.meta),
}


# ---------------------------------------------------------------------------
# Backward kernels.  Each returns one gradient per operand (None = no grad).
# ---------------------------------------------------------------------------


def _bw_matmul(n, g, a, b, out):
    ga = _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape)
    gb = _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape)
    return ga, gb


def _bw_softmax(n, g, a, out):
    dot = np.sum(g * out, axis=n.meta, keepdims=True)
    return ((g - dot) * out,)


def _bw_layer_norm(n, g, a, out):
    axis, eps = n.meta
    mu = np.mean(a, axis=axis, keepdims=True)
    xc = a - mu
    inv = 1.0 / np.sqrt(np.mean(xc * xc, axis=axis, keepdims=True) + eps)
    gm = np.mean(g, axis=axis, keepdims=True)
    gy = np.mean(g * out, axis=axis, keepdims=True)
    return (inv * (g - gm - out * gy),)


def _expand_reduced(g, node, arr):
    axis, keepdims = node.meta
    if keepdims or axis is None:
        return np.broadcast_to(np.reshape(g, _reduced_shape(arr.shape, axis, True)), arr.shape)
    axes = axis if isinstance(axis, tuple) else (axis,)
    g = np.expand_dims(g, axes)
    return np.broadcast_to(g, arr.shape)


def _bw_sum(n, g, a, out):
    return (np.ascontiguousarray(_expand_reduced(g, n, a)),)


def _bw_mean(n, g, a, out):
    axis, _ = n.meta
    count = a.size if axis is None else math.prod(
        a.shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))
    )
    return (_expand_reduced(g, n, a) / count,)


def _bw_var(n, g, a, out):
    axis, _ = n.meta
    count = a.size if axis is None else math.prod(
        a.shape[i] for i in (axis if isinstance(axis, tuple) else (axis,))
    )
    mu = np.mean(a, axis=axis if axis is not None else None, keepdims=True)
    return (_expand_reduced(g, n, a) * 2.0 * (a - mu) / count,)


def _bw_minmax(n, g, a, out):
    axis, keepdims = n.meta
    grad = np.zeros_like(a)
    if axis is None:
        idx = np.unravel_index(np.argmin(a) if n.op == "min" else np.argmax(a), a.shape)
        grad[idx] = g if np.ndim(g) == 0 else g.item()
        return (grad,)
    idx = np.expand_dims(np.argmin(a, axis=axis) if n.op == "min" else np.argmax(a, axis=axis), axis)
    gg = g if keepdims else np.expand_dims(g, axis)
    np.put_along_axis(grad, idx, gg, axis=axis)
    return (grad,)


def _bw_concatenate(n, g, *parts_and_out):
    parts, _ = parts_and_out[:-1], parts_and_out[-1]
    axis = n.meta
    sizes = [p.shape[axis] for p in parts]
    return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))


def _bw_slice(n, g, a, out):
    grad = np.zeros(np.shape(a), dtype=np.asarray(g).dtype)
    grad[n.meta] = g
    return (grad,)


def _bw_gather(n, g, a, idx, out):
    grad = np.zeros(np.broadcast_shapes(a.shape, tuple(1 if i == n.meta else s for i, s in enumerate(idx.shape))), dtype=g.dtype)
    ii = np.broadcast_to(idx.astype(np.intp), g.shape)
    grids = np.indices(g.shape, sparse=True)
    key = tuple(ii if d == n.meta else grids[d] for d in range(g.ndim))
    np.add.at(grad, key, g)
    return (_unbroadcast(grad, a.shape), None)


def _bw_l2_norm(n, g, a, out):
    safe = np.where(out == 0, 1.0, out)
    return (g[..., None] * np.where(out[..., None] == 0, 0.0, a / safe[..., None]),)


def _bw_frame_diff(n, g, a, out):
    axis = n.meta
    grad = np.zeros_like(a)
    head = [slice(None)] * a.ndim
    tail = [slice(None)] * a.ndim
    head[axis] = slice(1, None)
    tail[axis] = slice(0, -1)
    grad[tuple(head)] += g
    grad[tuple(tail)] -= g
    return (grad,)


def _bw_gelu(n, g, a, out):
    a2 = np.multiply(a, a)
    u = a2 * _GELU_A
    u += 1.0
    u *= a
    u *= _GELU_C
    np.tanh(u, out=u)  # u = t
    du = a2
    du *= 3.0 * _GELU_A
    du += 1.0
    du *= _GELU_C  # du = C*(1 + 3A*a^2)
    du *= a
    tt = u * u
    np.subtract(1.0, tt, out=tt)
    du *= tt  # a * (1 - t^2) * du
    du += u
    du += 1.0
    du *= 0.5
    du *= g
    return (du,)


_BACKWARD = {
    "add": lambda n, g, a, b, out: (_unbroadcast(g, np.shape(a)), _unbroadcast(g, np.shape(b))),
    "sub": lambda n, g, a, b, out: (_unbroadcast(g, np.shape(a)), _unbroadcast(-g, np.shape(b))),
    "mul": lambda n, g, a, b, out: (_unbroadcast(np.asarray(g * b), np.shape(a)), _unbroadcast(np.asarray(g * a), np.shape(b))),
    "div": lambda n, g, a, b, out: (_unbroadcast(np.asarray(g / b), np.shape(a)), _unbroadcast(np.asarray(-g * a / (b * b)), np.shape(b))),
    "neg": lambda n, g, a, out: (-g,),
    "matmul": _bw_matmul,
    "exp": lambda n, g, a, out: (g * out,),
    "log": lambda n, g, a, out: (g / a,),
    "sqrt": lambda n, g, a, out: (g * 0.5 / out,),
    "relu": lambda n, g, a, out: (g * (a > 0),),
    "gelu": _bw_gelu,
    "sigmoid": lambda n, g, a, out: (g * out * (1.0 - out),),
    "softmax": _bw_softmax,
    "layer_norm": _bw_layer_norm,
    "sum": _bw_sum,
    "mean": _bw_mean,
    "var": _bw_var,
    "min": _bw_minmax,
    "max": _bw_minmax,
    "concatenate": _bw_concatenate,
    "slice": _bw_slice,
    "reshape": lambda n, g, a, out: (np.reshape(g, np.shape(a)),),
    "transpose": lambda n, g, a, out: (np.transpose(g, np.argsort(n.meta)),),
    "broadcast_to": lambda n, g, a, out: (_unbroadcast(g, np.shape(a)),),
    "gather": _bw_gather,
    "topk_mask": lambda n, g, a, out: (None,),
    "l2_norm": _bw_l2_norm,
    "frame_diff": _bw_frame_diff,
}


# ---------------------------------------------------------------------------
# Compilation and execution.
# ---------------------------------------------------------------------------


def _compile(root: DiffExpr):
    """Topologically order the graph below ``root`` (cached on the root)."""
    if root._compiled is not None:
        return root._compiled
    nodes = []
    index = {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in index:
            continue
        if expanded:
            index[id(node)] = len(nodes)
            nodes.append(node)
        else:
            stack.append((node, True))
            for arg in node.args:
                if id(arg) not in index:
                    stack.append((arg, False))
    arg_idx = [tuple(index[id(a)] for a in n.args) for n in nodes]
    root._compiled = (nodes, arg_idx)
    return root._compiled


def _forward_pass(nodes, arg_idx, bindings, check_finite):
    vals = [None] * len(nodes)
    for i, node in enumerate(nodes):
        if node.op == "leaf":
            try:
                v = bindings[node.meta]
            except KeyError:
                raise EvalError(f"unbound leaf {node.meta!r}") from None
            v = np.asarray(v)
            if v.shape != node.shape:
                raise EvalError(f"leaf {node.meta!r} expects shape {node.shape}, got {v.shape}")
        elif node.op == "const":
            v = node.meta
        else:
            args = [vals[j] for j in arg_idx[i]]
            v = _FORWARD[node.op](node, *args)
            if check_finite and not np.all(np.isfinite(v)):
                raise EvalError(f"non-finite intermediate produced by op {node.op!r}")
        vals[i] = v
    return vals


def evaluate(expr: DiffExpr, bindings: dict, check_finite: bool = True) -> np.ndarray:
    """Forward-evaluate ``expr`` with named leaf bindings."""
    nodes, arg_idx = _compile(expr)
    vals = _forward_pass(nodes, arg_idx, bindings, check_finite)
    return np.asarray(vals[-1])


def gradient(scalar_expr: DiffExpr, wrt, bindings: dict, check_finite: bool = True) -> dict:
    """Gradients of a scalar expression with respect to named leaves.

    Returns ``{name: d(expr)/d(leaf)}`` with each gradient shaped like its
    leaf.  Leaves not reachable from the root get zero gradients.
    """
    _, grads = value_and_gradient(scalar_expr, wrt, bindings, check_finite)
    return grads


def value_and_gradient(scalar_expr: DiffExpr, wrt, bindings: dict, check_finite: bool = True):
    """Forward value and gradients from a single shared forward pass."""
    if scalar_expr.shape != ():
        raise ShapeError(f"gradient: root must be scalar, got shape {scalar_expr.shape}")
    if isinstance(wrt, str):
        wrt = [wrt]
    nodes, arg_idx = _compile(scalar_expr)
    vals = _forward_pass(nodes, arg_idx, bindings, check_finite)

    grads = [None] * len(nodes)
    out_val = vals[-1]
    grads[-1] = np.ones((), dtype=np.asarray(out_val).dtype if np.asarray(out_val).dtype.kind == "f" else np.float64)
    wanted = set(wrt)
    for i in range(len(nodes) - 1, -1, -1):
        node, g = nodes[i], grads[i]
        if g is None or node.op in ("leaf", "const"):
            continue
        args = [vals[j] for j in arg_idx[i]]
        parts = _BACKWARD[node.op](node, g, *args, vals[i])
        for j, part in zip(arg_idx[i], parts):
            if part is None:
                continue
            if grads[j] is None:
                grads[j] = part if part.shape == nodes[j].shape else np.array(part)
            else:
                grads[j] = grads[j] + part
        grads[i] = None  # release

    out = {}
    for i, node in enumerate(nodes):
        if node.op == "leaf" and node.meta in wanted:
            g = grads[i]
            if g is None:
                g = np.zeros(node.shape, dtype=np.asarray(vals[i]).dtype)
            # distinct leaf nodes may share a name; they bind one value
            out[node.meta] = np.asarray(g) if node.meta not in out else out[node.meta] + np.asarray(g)
    for name in wanted:
        if name not in out:
            b = np.asarray(bindings[name]) if name in bindings else None
            if b is None:
                raise EvalError(f"gradient: leaf {name!r} not present in graph or bindings")
            out[name] = np.zeros(b.shape, dtype=b.dtype)
    if check_finite:
        for name, g in out.items():
            if not np.all(np.isfinite(g)):
                raise EvalError(f"non-finite gradient for leaf {name!r}")
    return np.asarray(out_val), out
