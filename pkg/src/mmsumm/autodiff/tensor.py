"""Tensor values and the reverse-mode tape that records operations on them."""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from mmsumm.errors import ContractError, NumericError

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "mmsumm_active_tape", default=None
)


class Tensor:
    """A float64 array, optionally tracked for gradients.

    Tensors created by an operation on an active :class:`Tape` remember the
    node that produced them. Leaves (parameters, inputs) have no node.
    """

    __slots__ = ("data", "requires_grad", "name", "_tape", "_node_id", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._tape = None
        self._node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def node_id(self):
        return self._node_id

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(()))

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; every operator goes through a registered primitive
    def __add__(self, other):
        from mmsumm.autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from mmsumm.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from mmsumm.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from mmsumm.autodiff import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from mmsumm.autodiff import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from mmsumm.autodiff import ops

        return ops.matmul(self, other)

    @property
    def T(self):
        from mmsumm.autodiff import ops

        return ops.transpose(self)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class Node:
    id: int
    primitive: str
    inputs: tuple
    ctx: Any
    output: Tensor
    attrs: dict = field(default_factory=dict)


class Tape:
    """Ordered record of primitive applications.

    Use as a context manager so that operations from :mod:`mmsumm.autodiff.ops`
    record onto it::

        with Tape() as tape:
            loss = ops.sum(ops.mul(x, x))
        grads = tape.backward(loss)
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._token = None

    def __enter__(self):
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def _tracks(self, t: Tensor) -> bool:
        if t._tape is self:
            return t.requires_grad
        return t.requires_grad and t._tape is None

    def forward(self, primitive: str, *inputs, **attrs) -> Tensor:
        from mmsumm.autodiff.primitives import PRIMITIVES

        try:
            prim = PRIMITIVES[primitive]
        except KeyError:
            raise ContractError(f"unknown primitive {primitive!r}") from None
        tensors = tuple(as_tensor(x) for x in inputs)
        out, ctx = prim.forward(*(t.data for t in tensors), **attrs)
        node_id = len(self.nodes)
        if not np.all(np.isfinite(out)):
            raise NumericError(
                f"non-finite output from {primitive} at node {node_id}", node_id=node_id
            )
        result = Tensor(out)
        if any(self._tracks(t) for t in tensors):
            result.requires_grad = True
            result._tape = self
            result._node_id = node_id
            self.nodes.append(Node(node_id, primitive, tensors, ctx, result, attrs))
        return result

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Propagate d(loss) back through the tape.

        Returns a table mapping each tracked leaf tensor to its gradient.
        Intermediate nodes are released afterwards.
        """
        from mmsumm.autodiff.primitives import PRIMITIVES

        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {}
        leaves: dict[int, Tensor] = {}
        if loss._tape is not self:
            if loss.requires_grad:
                return {loss: np.ones_like(loss.data)}
            return {}
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            input_grads = PRIMITIVES[node.primitive].backward(node.ctx, g)
            for t, gi in zip(node.inputs, input_grads):
                if gi is None or not self._tracks(t):
                    continue
                if t._tape is None:
                    leaves[id(t)] = t
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        self.nodes = []
        return {t: grads.get(i, np.zeros_like(t.data)) for i, t in leaves.items()}


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def apply(primitive: str, *inputs, **attrs) -> Tensor:
    """Run a primitive, recording it on the active tape if there is one."""
    tape = active_tape()
    if tape is not None:
        return tape.forward(primitive, *inputs, **attrs)
    from mmsumm.autodiff.primitives import PRIMITIVES

    try:
        prim = PRIMITIVES[primitive]
    except KeyError:
        raise ContractError(f"unknown primitive {primitive!r}") from None
    tensors = tuple(as_tensor(x) for x in inputs)
    out, _ = prim.forward(*(t.data for t in tensors), **attrs)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite output from {primitive}")
    return Tensor(out)
