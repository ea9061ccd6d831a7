"""Reference-clock resampling and assembly of the (visual, acoustic, textual) blocks."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from mmsumm.autodiff import Tensor, ops
from mmsumm.errors import ContractError, TruncationWarning

log = logging.getLogger(__name__)

MODALITIES = ("visual", "acoustic", "textual")


@dataclass
class AlignedSample:
    """One fixed-length multimodal datum.

    ``x`` is ``L x 3*d_b`` with blocks ordered visual | acoustic | textual.
    ``pad_mask[t]`` is true where no stream had a row at timestep ``t``.
    """

    x: np.ndarray
    pad_mask: np.ndarray
    target: list[int] | None = None

    @property
    def length(self):
        return self.x.shape[0]


def _rate(value) -> Fraction:
    if value <= 0:
        raise ContractError(f"sampling rates must be positive, got {value}")
    return Fraction(value).limit_denominator(10**6)


def resample_indices(length: int, source_rate, reference_rate) -> np.ndarray:
    src, ref = _rate(source_rate), _rate(reference_rate)
    if length < 1:
        raise ContractError("cannot resample an empty stream")
    out_len = math.ceil(length * ref / src)
    return np.array([math.floor(j * src / ref) for j in range(out_len)], dtype=np.int64)


def resample_to_clock(seq, source_rate, reference_rate) -> np.ndarray:
    """Nearest-previous resampling of ``seq`` (rows = time) onto the reference clock."""
    seq = np.asarray(seq)
    idx = resample_indices(seq.shape[0], source_rate, reference_rate)
    return seq[idx]


def warn_truncation(what: str, length: int, limit: int):
    msg = f"{what} has {length} steps, truncating to {limit}"
    log.warning(msg)
    warnings.warn(msg, TruncationWarning, stacklevel=3)


def pad_stream(seq, L: int, width: int, what="stream"):
    """Zero-pad (or truncate) a ``l x width`` array to ``L`` rows.

    Returns the padded array and a boolean vector marking real rows.
    """
    if seq is None:
        return np.zeros((L, width)), np.zeros(L, dtype=bool)
    seq = np.asarray(seq, dtype=np.float64).reshape(-1, width)
    n = seq.shape[0]
    if n > L:
        warn_truncation(what, n, L)
        seq, n = seq[:L], L
    out = np.zeros((L, width))
    out[:n] = seq
    present = np.zeros(L, dtype=bool)
    present[:n] = True
    return out, present


def pad_tensor_stream(seq: Tensor, L: int, what="textual stream", warn=True) -> Tensor:
    """Differentiable counterpart of :func:`pad_stream` for ``(..., l, d)`` tensors."""
    n = seq.shape[-2]
    if n > L:
        if warn:
            warn_truncation(what, n, L)
        return ops.slice(seq, -2, 0, L)
    if n == L:
        return seq
    zeros = np.zeros(seq.shape[:-2] + (L - n, seq.shape[-1]))
    return ops.concat([seq, Tensor(zeros)], axis=-2)


def project_blocks(streams, present, projections) -> Tensor:
    """Per-modality affine map to ``d_b``, zeroed at absent timesteps, then concatenated.

    ``streams`` are three ``(..., L, d_m)`` arrays/tensors, ``present`` three
    ``(..., L)`` boolean masks and ``projections`` three ``(w, b)`` pairs.
    """
    blocks = []
    for stream, mask, (w, b) in zip(streams, present, projections):
        y = ops.linear(stream, w, b)
        blocks.append(ops.mul(y, np.asarray(mask, dtype=np.float64)[..., None]))
    return ops.concat(blocks, axis=-1)


def pad_and_assemble(visual, acoustic, textual, L: int, projections) -> AlignedSample:
    """Assemble one sample from streams already on the reference clock.

    ``projections`` maps each modality name to a ``(weight, bias)`` pair whose
    output width is the common block width. Missing streams may be ``None``
    or have zero rows.
    """
    streams, present = [], []
    for name, seq in zip(MODALITIES, (visual, acoustic, textual)):
        in_width = np.shape(getattr(projections[name][0], "data", projections[name][0]))[0]
        padded, mask = pad_stream(seq, L, in_width, what=f"{name} stream")
        streams.append(padded)
        present.append(mask)
    x = project_blocks(streams, present, [projections[m] for m in MODALITIES])
    pad_mask = ~(present[0] | present[1] | present[2])
    return AlignedSample(x=np.asarray(x.data), pad_mask=pad_mask)
