from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from mmsumm.autodiff.tensor import Tape, Tensor
from mmsumm.errors import ContractError

REL_FLOOR = 1e-8


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return np.abs(analytic - numeric) / denom


def numeric_grad(fn: Callable[..., Tensor], point: Sequence[np.ndarray], index: int, h: float):
    """Central differences of ``fn`` with respect to ``point[index]``."""
    arrays = [np.array(p, dtype=np.float64) for p in point]
    target = arrays[index]
    out = np.zeros_like(target)
    flat = target.reshape(-1)
    grad_flat = out.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = fn(*[Tensor(a) for a in arrays]).item()
        flat[k] = orig - h
        fm = fn(*[Tensor(a) for a in arrays]).item()
        flat[k] = orig
        grad_flat[k] = (fp - fm) / (2.0 * h)
    return out


def grad_check(fn: Callable[..., Tensor], point: Sequence[np.ndarray], h: float = 1e-5, wrt=None):
    """Largest relative error between tape gradients and central differences.

    ``fn`` takes one Tensor per entry of ``point`` and must return a scalar.
    ``wrt`` limits the check to some argument positions (default: all).
    """
    if h <= 0:
        raise ContractError("step h must be positive")
    wrt = range(len(point)) if wrt is None else wrt
    leaves = [Tensor(np.array(p, dtype=np.float64), requires_grad=True) for p in point]
    with Tape() as tape:
        out = fn(*leaves)
    if out.data.size != 1:
        raise ContractError(f"function must be scalar-valued, got shape {out.shape}")
    table = tape.backward(out)
    worst = 0.0
    for i in wrt:
        analytic = table.get(leaves[i], np.zeros_like(leaves[i].data))
        numeric = numeric_grad(fn, point, i, h)
        if analytic.size:
            worst = max(worst, float(relative_error(analytic, numeric).max()))
    return worst
