"""Parameter table layout and initialization."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from mmsumm.autodiff import Tensor
from mmsumm.config import ModelConfig, SequenceConfig
from mmsumm.errors import ConfigError

# Attention receptive fields and the blocks each one reads, in x's block order
# (visual=0, acoustic=1, textual=2).
FIELDS = ("L", "V", "A", "LV", "LA", "VA", "LVA")
BLOCK_OF = {"V": 0, "A": 1, "L": 2}


def field_blocks(field: str) -> tuple[int, ...]:
    return tuple(sorted(BLOCK_OF[c] for c in field))


def param_layout(cfg: ModelConfig, seq: SequenceConfig, vocab_size: int):
    """Ordered ``name -> (shape, kind)``; kind picks the initializer."""
    if vocab_size < 6:
        raise ConfigError("vocabulary must hold the reserved tokens plus at least one word")
    d_b, d_x, d_y = cfg.d_b, cfg.d_x, cfg.d_y
    out = OrderedDict()

    def affine(name, fan_in, fan_out):
        out[f"{name}.w"] = ((fan_in, fan_out), "weight")
        out[f"{name}.b"] = ((fan_out,), "bias")

    affine("proj.visual", cfg.d_v, d_b)
    affine("proj.acoustic", cfg.d_a, d_b)
    affine("proj.textual", cfg.d_t, d_b)
    out["fusion.w_b"] = ((cfg.d_t, cfg.d_t), "weight")
    out["text_embed"] = ((vocab_size, cfg.d_t), "text")
    out["token_embed"] = ((vocab_size, d_b), "embedding")
    out["pos_embed"] = ((seq.max_positions, d_x), "embedding")
    for i in range(cfg.n_layers):
        for p in range(cfg.n_fms):
            pre = f"layers.{i}.fms.{p}"
            for f in FIELDS:
                width = len(f) * d_b
                for qkv in "qkv":
                    affine(f"{pre}.{f}.{qkv}", width, width)
            affine(f"{pre}.s1", 12 * d_b, d_x)
        affine(f"layers.{i}.s2", cfg.n_fms * d_x, d_x)
        out[f"layers.{i}.ln1.g"] = ((d_x,), "gain")
        out[f"layers.{i}.ln1.b"] = ((d_x,), "bias")
        affine(f"layers.{i}.ff1", d_x, cfg.d_ff)
        affine(f"layers.{i}.ff2", cfg.d_ff, d_x)
        out[f"layers.{i}.ln2.g"] = ((d_x,), "gain")
        out[f"layers.{i}.ln2.b"] = ((d_x,), "bias")
    affine("gru.x", d_x, 3 * d_y)
    affine("gru.h", d_y, 3 * d_y)
    if not cfg.tie_embeddings:
        out["out.w"] = ((d_y, vocab_size), "weight")
    out["out.b"] = ((vocab_size,), "bias")
    return out


def init_params(cfg: ModelConfig, seq: SequenceConfig, vocab_size: int, rng) -> OrderedDict:
    """Glorot-uniform weights, zero biases, N(0, 0.02) embeddings, unit gains.

    The text-stream table is drawn from N(0, 1) instead.
    """
    cfg.validate()
    seq.validate()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    params = OrderedDict()
    for name, (shape, kind) in param_layout(cfg, seq, vocab_size).items():
        if kind == "weight":
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            value = rng.uniform(-limit, limit, size=shape)
        elif kind == "embedding":
            value = rng.normal(0.0, 0.02, size=shape)
        elif kind == "text":
            # stands in for contextual encoder states, which are unit scale
            value = rng.normal(0.0, 1.0, size=shape)
        elif kind == "gain":
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        params[name] = Tensor(value, requires_grad=True, name=name)
    return params


def inert_parameters(params) -> list[str]:
    """Attention key biases. Adding the same amount to every score of a
    query leaves its softmax unchanged, so their gradient is exactly zero."""
    return [name for name in params if name.endswith(".k.b")]


def count_params(params) -> int:
    return int(sum(t.data.size for t in params.values()))
