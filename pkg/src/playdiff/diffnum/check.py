"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .core import DiffExpr, EvalError, ShapeError, evaluate, gradient

__all__ = ["grad_check"]


def grad_check(f: DiffExpr, point: dict, step: float = 1e-5, wrt=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``point`` binds every leaf of ``f``; ``wrt`` limits which leaves are
    perturbed (default: all float leaves in ``point``).  Error per
    component is |analytic - central| / max(|analytic|, |central|, 1e-8).
    Run in 64-bit: central differences are unreliable at 32-bit.
    """
    if f.shape != ():
        raise ShapeError(f"grad_check: expression must be scalar, got shape {f.shape}")
    point = {k: np.asarray(v) for k, v in point.items()}
    if wrt is None:
        wrt = [k for k, v in point.items() if v.dtype.kind == "f"]
    elif isinstance(wrt, str):
        wrt = [wrt]

    analytic = gradient(f, wrt, point)
    worst = 0.0
    for name in wrt:
        base = np.ascontiguousarray(point[name], dtype=np.float64)
        an = np.ascontiguousarray(analytic[name], dtype=np.float64)
        num = np.empty(base.size)
        flat = base.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = float(evaluate(f, {**point, name: base}))
            flat[i] = keep - step
            lo = float(evaluate(f, {**point, name: base}))
            flat[i] = keep
            num[i] = (hi - lo) / (2.0 * step)
        num = num.reshape(base.shape)
        denom = np.maximum(np.maximum(np.abs(an), np.abs(num)), 1e-8)
        err = np.abs(an - num) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
