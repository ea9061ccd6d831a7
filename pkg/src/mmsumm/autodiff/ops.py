"""Functional front-end over the registered primitives."""

from __future__ import annotations

import numpy as np

from mmsumm.autodiff.tensor import Tensor, apply


def matmul(a, b):
    return apply("matmul", a, b)


def add(a, b):
    return apply("add", a, b)


def sub(a, b):
    return apply("sub", a, b)


def mul(a, b):
    return apply("mul", a, b)


def scale(x, factor: float):
    return apply("scale", x, factor=float(factor))


def tanh(x):
    return apply("tanh", x)


def sigmoid(x):
    return apply("sigmoid", x)


def relu(x):
    return apply("relu", x)


def softmax(x, axis=-1):
    return apply("softmax", x, axis=axis)


def log_softmax(x, axis=-1):
    return apply("log_softmax", x, axis=axis)


def layer_norm(x, eps=1e-8):
    return apply("layer_norm", x, eps=eps)


def dropout(x, rate: float, rng: np.random.Generator | None, training=True):
    if not training or rate == 0.0 or rng is None:
        return x
    return apply("dropout", x, rate=rate, rng=rng)


def embed(table, ids):
    return apply("embed", table, ids=np.asarray(ids, dtype=np.int64))


def concat(xs, axis=-1):
    if len(xs) == 1:
        return xs[0] if isinstance(xs[0], Tensor) else Tensor(xs[0])
    return apply("concat", *xs, axis=axis)


def slice(x, axis, start, stop):  # noqa: A001 - mirrors the primitive name
    return apply("slice", x, axis=axis, start=start, stop=stop)


def transpose(x, axes=None):
    return apply("transpose", x, axes=axes)


def reshape(x, shape):
    return apply("reshape", x, shape=tuple(shape))


def sum(x, axis=None, keepdims=False):  # noqa: A001
    return apply("sum", x, axis=axis, keepdims=keepdims)


def cosine(a, b):
    return apply("cosine", a, b)


def masked_fill(x, mask, value=-1e9):
    return apply("masked_fill", x, mask=np.asarray(mask, dtype=bool), value=value)


def cross_entropy(logits, targets, mask=None):
    return apply(
        "cross_entropy",
        logits,
        targets=np.asarray(targets, dtype=np.int64),
        mask=None if mask is None else np.asarray(mask, dtype=bool),
    )


def linear(x, w, b=None):
    y = matmul(x, w)
    return y if b is None else add(y, b)
