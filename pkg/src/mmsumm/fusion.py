"""Guided attention between ASR and OCR token embeddings.

Each OCR token attends over the ASR tokens through a learned bilinear
affinity, yielding an ASR context vector. The OCR token is then scaled by its
cosine distance to that context, so slide text that merely repeats the speech
is damped and novel slide text passes through. The textual stream is the ASR
rows followed by the gated OCR rows.

All functions accept numpy arrays or :class:`~mmsumm.autodiff.Tensor` and
record on the active tape, so ``w_b`` can be trained. Leading batch axes are
allowed as long as every sample in the batch shares ``n`` and ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmsumm.autodiff import Tensor, as_tensor, ops
from mmsumm.errors import ContractError, ShapeError
from mmsumm.modality.align import warn_truncation

DEFAULT_OCR_CAP = 500


@dataclass
class FusionResult:
    affinity: Tensor  # (..., n, m)
    alpha: Tensor  # (..., n, m), columns sum to 1
    contexts: Tensor  # (..., m, d)
    gates: Tensor  # (..., m), in [0, 2]
    fused: Tensor  # (..., n + m, d)


def _check(asr, ocr, w_b):
    if asr.ndim < 2 or ocr.ndim < 2:
        raise ShapeError("asr/ocr must be (..., tokens, d)", asr.shape, ocr.shape)
    if asr.shape[-2] < 1:
        raise ContractError("need at least one ASR token")
    d = asr.shape[-1]
    if ocr.shape[-1] != d or w_b.shape != (d, d):
        raise ShapeError("embedding widths differ", asr.shape, ocr.shape, w_b.shape)


def affinity(asr, ocr, w_b) -> Tensor:
    """``tanh(asr @ w_b @ ocr^T)``, shape ``(..., n, m)``."""
    asr, ocr, w_b = as_tensor(asr), as_tensor(ocr), as_tensor(w_b)
    _check(asr, ocr, w_b)
    return ops.tanh(ops.matmul(ops.matmul(asr, w_b), ops.transpose(ocr)))


def attend_contexts(C, asr):
    """Softmax each affinity column over the ASR index; return ``(alpha, contexts)``."""
    alpha = ops.softmax(C, axis=-2)
    contexts = ops.matmul(ops.transpose(alpha), asr)
    return alpha, contexts


def redundancy_gate(ocr, contexts) -> Tensor:
    """Cosine distance between each OCR row and its attended context."""
    return ops.sub(1.0, ops.cosine(ocr, contexts))


def fuse(asr, ocr, w_b, gating=True, ocr_cap=DEFAULT_OCR_CAP) -> FusionResult:
    """Fuse ASR rows with redundancy-gated OCR rows.

    With ``gating=False`` every gate is 1 (plain concatenation), which is the
    ablation baseline.
    """
    asr, ocr, w_b = as_tensor(asr), as_tensor(ocr), as_tensor(w_b)
    _check(asr, ocr, w_b)
    m = ocr.shape[-2]
    if m > ocr_cap:
        warn_truncation("OCR stream", m, ocr_cap)
        ocr = ops.slice(ocr, -2, 0, ocr_cap)
        m = ocr_cap
    n = asr.shape[-2]
    batch = asr.shape[:-2]
    if m == 0:
        empty = Tensor(np.zeros(batch + (n, 0)))
        return FusionResult(
            empty, empty, Tensor(np.zeros(batch + (0, asr.shape[-1]))), Tensor(np.zeros(batch + (0,))), asr
        )
    C = affinity(asr, ocr, w_b)
    alpha, contexts = attend_contexts(C, asr)
    if gating:
        gates = redundancy_gate(ocr, contexts)
        gated = ops.mul(ops.reshape(gates, gates.shape + (1,)), ocr)
    else:
        gates = Tensor(np.ones(batch + (m,)))
        gated = ocr
    return FusionResult(C, alpha, contexts, gates, ops.concat([asr, gated], axis=-2))
