"""Factorized multimodal transformer with a GRU output head.

Inputs are ``(B, T, 3*d_b)`` tensors whose last axis holds the visual,
acoustic and textual blocks. Every attention inside an FMS unit reads and
writes only the blocks of its receptive field, is causally masked, and
ignores padded keys.
"""

from __future__ import annotations

import math

import numpy as np

from mmsumm.autodiff import Tensor, ops
from mmsumm.config import ModelConfig, SequenceConfig
from mmsumm.errors import ConfigError, LengthError, ShapeError
from mmsumm.model.params import FIELDS, count_params, field_blocks, init_params


class FmtModel:
    def __init__(self, config: ModelConfig, seq: SequenceConfig, vocab_size: int, params):
        self.config = config
        self.seq = seq
        self.vocab_size = vocab_size
        self.params = params

    @classmethod
    def init(cls, config: ModelConfig, seq: SequenceConfig, vocab_size: int, rng) -> "FmtModel":
        return cls(config, seq, vocab_size, init_params(config, seq, vocab_size, rng))

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def affine(self, name):
        return self.params[f"{name}.w"], self.params[f"{name}.b"]

    def parameter_count(self) -> int:
        return count_params(self.params)


def attention_mask(pad_mask: np.ndarray) -> np.ndarray:
    """``(B, T, T)`` boolean mask of disallowed (query, key) pairs.

    Future keys are always blocked. Padded keys are blocked except on the
    diagonal, so a padded query still has one legal key and never reads ahead.
    """
    pad_mask = np.asarray(pad_mask, dtype=bool)
    T = pad_mask.shape[-1]
    future = np.triu(np.ones((T, T), dtype=bool), k=1)
    eye = np.eye(T, dtype=bool)
    return future[None] | (pad_mask[:, None, :] & ~eye[None])


def split_blocks(x: Tensor, d_b: int) -> list[Tensor]:
    if x.shape[-1] != 3 * d_b:
        raise ConfigError(f"input width {x.shape[-1]} is not 3 * d_b = {3 * d_b}")
    return [ops.slice(x, -1, i * d_b, (i + 1) * d_b) for i in range(3)]


def field_attention(model: FmtModel, prefix: str, field: str, blocks, mask) -> Tensor:
    """Scaled dot-product self-attention over the blocks of one receptive field."""
    z = ops.concat([blocks[i] for i in field_blocks(field)], axis=-1)
    q = ops.linear(z, *model.affine(f"{prefix}.{field}.q"))
    k = ops.linear(z, *model.affine(f"{prefix}.{field}.k"))
    v = ops.linear(z, *model.affine(f"{prefix}.{field}.v"))
    heads = model.config.heads
    width = z.shape[-1]
    dh = width // heads
    outs = []
    for h in range(heads):
        if heads == 1:
            qh, kh, vh = q, k, v
        else:
            qh, kh, vh = (ops.slice(t, -1, h * dh, (h + 1) * dh) for t in (q, k, v))
        scores = ops.scale(ops.matmul(qh, ops.transpose(kh)), 1.0 / math.sqrt(dh))
        weights = ops.softmax(ops.masked_fill(scores, mask), axis=-1)
        outs.append(ops.matmul(weights, vh))
    return ops.concat(outs, axis=-1)


def fms_forward(model: FmtModel, prefix: str, x: Tensor, pad_mask, return_fields=False):
    """One FMS unit: seven field attentions, concatenated, reduced by S1 to ``d_x``."""
    mask = attention_mask(pad_mask)
    blocks = split_blocks(x, model.config.d_b)
    per_field = {f: field_attention(model, prefix, f, blocks, mask) for f in FIELDS}
    out = ops.linear(ops.concat([per_field[f] for f in FIELDS], axis=-1), *model.affine(f"{prefix}.s1"))
    return (out, per_field) if return_fields else out


def _layer_norm(model, name, x):
    y = ops.layer_norm(x, eps=model.config.ln_eps)
    return ops.add(ops.mul(y, model[f"{name}.g"]), model[f"{name}.b"])


def mtl_forward(model: FmtModel, i: int, x: Tensor, pad_mask, training=False, rng=None, dropout=0.0):
    """P FMS units -> S2 -> residual + norm -> feedforward -> residual + norm."""
    pre = f"layers.{i}"
    units = [fms_forward(model, f"{pre}.fms.{p}", x, pad_mask) for p in range(model.config.n_fms)]
    s = ops.linear(ops.concat(units, axis=-1), *model.affine(f"{pre}.s2"))
    h = _layer_norm(model, f"{pre}.ln1", ops.add(x, ops.dropout(s, dropout, rng, training)))
    f = ops.linear(ops.relu(ops.linear(h, *model.affine(f"{pre}.ff1"))), *model.affine(f"{pre}.ff2"))
    return _layer_norm(model, f"{pre}.ln2", ops.add(h, ops.dropout(f, dropout, rng, training)))


def add_positions(model: FmtModel, x: Tensor) -> Tensor:
    T = x.shape[-2]
    limit = model["pos_embed"].shape[0]
    if T > limit:
        raise LengthError(f"sequence of {T} positions exceeds the positional table ({limit})")
    return ops.add(x, ops.slice(model["pos_embed"], 0, 0, T))


def fmt_forward(model: FmtModel, x: Tensor, pad_mask, training=False, rng=None, dropout=0.0) -> Tensor:
    """Positional embeddings, then the MTL stack. ``x`` is ``(B, T, d_x)``."""
    if x.ndim != 3 or x.shape[-1] != model.config.d_x:
        raise ShapeError(f"expected (B, T, {model.config.d_x}) input", x.shape)
    h = ops.dropout(add_positions(model, x), dropout, rng, training)
    for i in range(model.config.n_layers):
        h = mtl_forward(model, i, h, pad_mask, training, rng, dropout)
    return h


def gru_forward(model: FmtModel, states: Tensor, pad_mask=None) -> Tensor:
    """Left-to-right GRU over ``(B, T, d_x)`` states; returns ``(B, T, d_y)``.

    At padded positions the hidden state is carried through unchanged.
    """
    d_y = model.config.d_y
    B, T = states.shape[0], states.shape[1]
    xw = ops.linear(states, *model.affine("gru.x"))  # (B, T, 3 d_y): r | z | n
    wh, bh = model.affine("gru.h")
    h = Tensor(np.zeros((B, 1, d_y)))
    outs = []
    pad = None if pad_mask is None else np.asarray(pad_mask, dtype=bool)
    for t in range(T):
        xt = ops.slice(xw, 1, t, t + 1)
        ht = ops.linear(h, wh, bh)
        rz = ops.sigmoid(ops.add(ops.slice(xt, -1, 0, 2 * d_y), ops.slice(ht, -1, 0, 2 * d_y)))
        r, z = ops.slice(rz, -1, 0, d_y), ops.slice(rz, -1, d_y, 2 * d_y)
        n = ops.tanh(ops.add(ops.slice(xt, -1, 2 * d_y, 3 * d_y), ops.mul(r, ops.slice(ht, -1, 2 * d_y, 3 * d_y))))
        h_new = ops.add(n, ops.mul(z, ops.sub(h, n)))
        if pad is not None and pad[:, t].any():
            keep = pad[:, t].astype(np.float64)[:, None, None]
            h_new = ops.add(ops.mul(h_new, 1.0 - keep), ops.mul(h, keep))
        h = h_new
        outs.append(h)
    return ops.concat(outs, axis=1)


def head_logits(model: FmtModel, states: Tensor, pad_mask=None) -> Tensor:
    """GRU over the final states, then projection to vocabulary logits."""
    g = gru_forward(model, states, pad_mask)
    if model.config.tie_embeddings:
        w = ops.transpose(model["token_embed"])
    else:
        w = model["out.w"]
    return ops.add(ops.matmul(g, w), model["out.b"])
