"""Finite-difference probes for every registered primitive."""

from __future__ import annotations

import zlib

import numpy as np

from mmsumm.autodiff import ops
from mmsumm.autodiff.gradcheck import grad_check
from mmsumm.autodiff.primitives import PRIMITIVES
from mmsumm.autodiff.tensor import Tensor

# One scalar-valued probe per primitive. Each returns (fn, point); fn contracts
# the primitive's output against a fixed random weight so every output entry
# contributes to the checked gradient.


def _contract(out, rng):
    w = Tensor(rng.normal(size=out.shape))
    return ops.sum(ops.mul(out, w))


def probe(name, rng):
    r = rng.normal
    if name == "matmul":
        return (lambda a, b: _contract(ops.matmul(a, b), np.random.default_rng(1))), [
            r(size=(2, 3, 4)),
            r(size=(4, 5)),
        ]
    if name in ("add", "sub", "mul"):
        f = getattr(ops, name)
        return (lambda a, b: _contract(f(a, b), np.random.default_rng(2))), [
            r(size=(3, 4)),
            r(size=(1, 4)),
        ]
    if name == "scale":
        return (lambda x: _contract(ops.scale(x, -1.7), np.random.default_rng(3))), [r(size=(3, 2))]
    if name in ("tanh", "sigmoid"):
        f = getattr(ops, name)
        return (lambda x: _contract(f(x), np.random.default_rng(4))), [r(size=(4, 3))]
    if name == "relu":
        x = r(size=(4, 3))
        x[np.abs(x) < 0.05] += 0.2  # keep away from the kink
        return (lambda x: _contract(ops.relu(x), np.random.default_rng(5))), [x]
    if name == "softmax":
        return (lambda x: _contract(ops.softmax(x, axis=0), np.random.default_rng(6))), [r(size=(4, 3))]
    if name == "log_softmax":
        return (lambda x: _contract(ops.log_softmax(x), np.random.default_rng(7))), [r(size=(3, 5))]
    if name == "layer_norm":
        return (lambda x: _contract(ops.layer_norm(x), np.random.default_rng(8))), [r(size=(3, 6))]
    if name == "dropout":
        return (
            lambda x: _contract(ops.dropout(x, 0.3, np.random.default_rng(9)), np.random.default_rng(10))
        ), [r(size=(4, 5))]
    if name == "embed":
        ids = np.array([[0, 2], [2, 3]])
        return (lambda t: _contract(ops.embed(t, ids), np.random.default_rng(11))), [r(size=(5, 3))]
    if name == "concat":
        return (lambda a, b: _contract(ops.concat([a, b], axis=1), np.random.default_rng(12))), [
            r(size=(2, 3)),
            r(size=(2, 2)),
        ]
    if name == "slice":
        return (lambda x: _contract(ops.slice(x, 1, 1, 3), np.random.default_rng(13))), [r(size=(2, 4, 3))]
    if name == "transpose":
        return (lambda x: _contract(ops.transpose(x), np.random.default_rng(14))), [r(size=(2, 3, 4))]
    if name == "reshape":
        return (lambda x: _contract(ops.reshape(x, (6, 2)), np.random.default_rng(15))), [r(size=(3, 4))]
    if name == "sum":
        return (lambda x: _contract(ops.sum(x, axis=1), np.random.default_rng(16))), [r(size=(3, 4))]
    if name == "cosine":
        return (lambda a, b: _contract(ops.cosine(a, b), np.random.default_rng(17))), [
            r(size=(4, 5)),
            r(size=(4, 5)),
        ]
    if name == "masked_fill":
        mask = np.array([[True, False, False], [False, False, True]])
        return (
            lambda x: _contract(ops.softmax(ops.masked_fill(x, mask)), np.random.default_rng(18))
        ), [r(size=(2, 3))]
    if name == "cross_entropy":
        targets = np.array([[1, 0, 3], [2, 2, 0]])
        mask = np.array([[True, False, True], [True, True, False]])
        return (lambda z: ops.cross_entropy(z, targets, mask)), [r(size=(2, 3, 4))]
    raise KeyError(f"no probe for primitive {name}")


def primitive_suite(points=10, h=1e-5) -> dict:
    """Max relative error per primitive over ``points`` random probes each."""
    report = {}
    for name in sorted(PRIMITIVES):
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        report[name] = max(grad_check(*probe(name, rng), h=h) for _ in range(points))
    return report
