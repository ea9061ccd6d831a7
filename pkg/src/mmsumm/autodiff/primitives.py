"""Registered primitives: forward returns ``(value, ctx)``, backward maps an
output gradient to one gradient (or None) per input."""

from __future__ import annotations

import numpy as np

from mmsumm.errors import ContractError, ShapeError

PRIMITIVES: dict[str, type] = {}

MASK_FILL = -1e9
COSINE_FLOOR = 1e-12


def register(name):
    def deco(cls):
        cls.name = name
        PRIMITIVES[name] = cls
        return cls

    return deco


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a, b, what):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{what}: shapes do not broadcast", a.shape, b.shape) from None


@register("matmul")
class MatMul:
    @staticmethod
    def forward(a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError("matmul: inner dimensions differ", a.shape, b.shape)
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError:
            raise ShapeError("matmul: batch dimensions differ", a.shape, b.shape) from None
        return a @ b, (a, b)

    @staticmethod
    def backward(ctx, g):
        a, b = ctx
        ga = g @ np.swapaxes(b, -1, -2)
        gb = np.swapaxes(a, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)


@register("add")
class Add:
    @staticmethod
    def forward(a, b):
        _check_broadcast(a, b, "add")
        return a + b, (a.shape, b.shape)

    @staticmethod
    def backward(ctx, g):
        sa, sb = ctx
        return unbroadcast(g, sa), unbroadcast(g, sb)


@register("sub")
class Sub:
    @staticmethod
    def forward(a, b):
        _check_broadcast(a, b, "sub")
        return a - b, (a.shape, b.shape)

    @staticmethod
    def backward(ctx, g):
        sa, sb = ctx
        return unbroadcast(g, sa), unbroadcast(-g, sb)


@register("mul")
class Mul:
    @staticmethod
    def forward(a, b):
        _check_broadcast(a, b, "mul")
        return a * b, (a, b)

    @staticmethod
    def backward(ctx, g):
        a, b = ctx
        return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)


@register("scale")
class Scale:
    @staticmethod
    def forward(x, factor):
        return x * factor, factor

    @staticmethod
    def backward(ctx, g):
        return (g * ctx,)


@register("tanh")
class Tanh:
    @staticmethod
    def forward(x):
        y = np.tanh(x)
        return y, y

    @staticmethod
    def backward(ctx, g):
        return (g * (1.0 - ctx * ctx),)


@register("sigmoid")
class Sigmoid:
    @staticmethod
    def forward(x):
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        return y, y

    @staticmethod
    def backward(ctx, g):
        return (g * ctx * (1.0 - ctx),)


@register("relu")
class Relu:
    @staticmethod
    def forward(x):
        mask = x > 0
        return x * mask, mask

    @staticmethod
    def backward(ctx, g):
        return (g * ctx,)


def _softmax(x, axis):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@register("softmax")
class Softmax:
    @staticmethod
    def forward(x, axis=-1):
        s = _softmax(x, axis)
        return s, (s, axis)

    @staticmethod
    def backward(ctx, g):
        s, axis = ctx
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)


@register("log_softmax")
class LogSoftmax:
    @staticmethod
    def forward(x, axis=-1):
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        return out, (out, axis)

    @staticmethod
    def backward(ctx, g):
        out, axis = ctx
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)


@register("layer_norm")
class LayerNorm:
    """Normalize the last axis to zero mean, unit variance (no affine part)."""

    @staticmethod
    def forward(x, eps=1e-8):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        y = xc * inv
        return y, (y, inv)

    @staticmethod
    def backward(ctx, g):
        y, inv = ctx
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - y * gy),)


@register("dropout")
class Dropout:
    """Inverted dropout; ``rng`` is a numpy Generator consumed once per call."""

    @staticmethod
    def forward(x, rate, rng):
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
        keep = rng.random(x.shape) >= rate
        mask = keep / (1.0 - rate)
        return x * mask, mask

    @staticmethod
    def backward(ctx, g):
        return (g * ctx,)


@register("embed")
class Embed:
    """Row lookup ``table[ids]``; ``ids`` is an integer array of any shape."""

    @staticmethod
    def forward(table, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if table.ndim != 2:
            raise ShapeError("embed: table must be 2-D", table.shape)
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise ContractError(f"embed: id out of range for table of {table.shape[0]} rows")
        return table[ids], (table.shape, ids)

    @staticmethod
    def backward(ctx, g):
        shape, ids = ctx
        out = np.zeros(shape)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (out,)


@register("concat")
class Concat:
    @staticmethod
    def forward(*xs, axis=-1):
        if not xs:
            raise ContractError("concat needs at least one input")
        ref = xs[0]
        ax = axis % ref.ndim
        for x in xs[1:]:
            if x.ndim != ref.ndim or any(
                x.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != ax
            ):
                raise ShapeError("concat: off-axis extents differ", ref.shape, x.shape)
        sizes = [x.shape[ax] for x in xs]
        return np.concatenate(xs, axis=ax), (ax, sizes)

    @staticmethod
    def backward(ctx, g):
        ax, sizes = ctx
        cuts = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, cuts, axis=ax))


@register("slice")
class Slice:
    """``x[start:stop]`` along ``axis``; rank is preserved."""

    @staticmethod
    def forward(x, axis, start, stop):
        ax = axis % x.ndim
        if not 0 <= start <= stop <= x.shape[ax]:
            raise ShapeError(f"slice [{start}:{stop}] on axis {ax} out of range", x.shape)
        index = [slice(None)] * x.ndim
        index[ax] = slice(start, stop)
        index = tuple(index)
        return x[index].copy(), (x.shape, index)

    @staticmethod
    def backward(ctx, g):
        shape, index = ctx
        out = np.zeros(shape)
        out[index] = g
        return (out,)


@register("transpose")
class Transpose:
    """Permute axes; the default swaps the last two."""

    @staticmethod
    def forward(x, axes=None):
        if axes is None:
            if x.ndim < 2:
                raise ShapeError("transpose needs rank >= 2", x.shape)
            axes = list(range(x.ndim))
            axes[-1], axes[-2] = axes[-2], axes[-1]
        axes = tuple(axes)
        return np.transpose(x, axes).copy(), np.argsort(axes)

    @staticmethod
    def backward(ctx, g):
        return (np.transpose(g, ctx),)


@register("reshape")
class Reshape:
    @staticmethod
    def forward(x, shape):
        try:
            return x.reshape(shape).copy(), x.shape
        except ValueError:
            raise ShapeError(f"reshape to {tuple(shape)} impossible", x.shape) from None

    @staticmethod
    def backward(ctx, g):
        return (g.reshape(ctx),)


@register("sum")
class Sum:
    @staticmethod
    def forward(x, axis=None, keepdims=False):
        return np.asarray(x.sum(axis=axis, keepdims=keepdims)), (x.shape, axis, keepdims)

    @staticmethod
    def backward(ctx, g):
        shape, axis, keepdims = ctx
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)


@register("cosine")
class Cosine:
    """Row-wise cosine similarity along the last axis, denominator floored."""

    @staticmethod
    def forward(a, b):
        if a.shape != b.shape:
            raise ShapeError("cosine: operands differ", a.shape, b.shape)
        dot = (a * b).sum(axis=-1)
        na = np.sqrt((a * a).sum(axis=-1))
        nb = np.sqrt((b * b).sum(axis=-1))
        denom = na * nb + COSINE_FLOOR
        return dot / denom, (a, b, dot, na, nb, denom)

    @staticmethod
    def backward(ctx, g):
        a, b, dot, na, nb, denom = ctx
        with np.errstate(divide="ignore", invalid="ignore"):
            ua = np.where(na[..., None] > 0, a / na[..., None], 0.0)
            ub = np.where(nb[..., None] > 0, b / nb[..., None], 0.0)
        inv = (1.0 / denom)[..., None]
        k = (dot / denom**2)[..., None]
        ga = b * inv - k * nb[..., None] * ua
        gb = a * inv - k * na[..., None] * ub
        return g[..., None] * ga, g[..., None] * gb


@register("masked_fill")
class MaskedFill:
    """Replace entries where ``mask`` is true by ``value`` (default -1e9)."""

    @staticmethod
    def forward(x, mask, value=MASK_FILL):
        mask = np.asarray(mask, dtype=bool)
        try:
            full = np.broadcast_to(mask, x.shape)
        except ValueError:
            raise ShapeError("masked_fill: mask does not broadcast", x.shape, mask.shape) from None
        return np.where(full, value, x), full

    @staticmethod
    def backward(ctx, g):
        return (np.where(ctx, 0.0, g), None)


@register("cross_entropy")
class CrossEntropy:
    """Mean negative log-likelihood over positions where ``mask`` is true.

    ``logits`` has shape ``(..., V)``; ``targets`` and ``mask`` have shape ``(...)``.
    """

    @staticmethod
    def forward(logits, targets, mask=None):
        targets = np.asarray(targets, dtype=np.int64)
        if logits.shape[:-1] != targets.shape:
            raise ShapeError("cross_entropy: logits/targets", logits.shape, targets.shape)
        if mask is None:
            mask = np.ones(targets.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != targets.shape:
            raise ShapeError("cross_entropy: mask/targets", mask.shape, targets.shape)
        count = int(mask.sum())
        if count == 0:
            raise ContractError("cross_entropy: mask selects no positions")
        safe = np.where(mask, targets, 0)
        if safe.size and (safe.min() < 0 or safe.max() >= logits.shape[-1]):
            raise ContractError("cross_entropy: target id out of range")
        shifted = logits - logits.max(axis=-1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
        loss = -(picked * mask).sum() / count
        return np.asarray(loss), (logp, safe, mask, count)

    @staticmethod
    def backward(ctx, g):
        logp, safe, mask, count = ctx
        grad = np.exp(logp)
        np.put_along_axis(
            grad, safe[..., None], np.take_along_axis(grad, safe[..., None], -1) - 1.0, -1
        )
        grad *= (mask / count)[..., None]
        return grad * g, None, None
