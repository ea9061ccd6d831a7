"""Turn manifest records into model-ready examples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmsumm.config import ModelConfig, SequenceConfig
from mmsumm.errors import FormatError
from mmsumm.modality.align import pad_stream, resample_indices, resample_to_clock, warn_truncation
from mmsumm.modality.features import read_feature_file
from mmsumm.modality.manifest import SampleRecord, read_tokens
from mmsumm.modality.vocab import VocabSpec, build_vocab, tokenize


@dataclass
class Example:
    id: str
    visual: np.ndarray  # L x d_v, zero-padded
    visual_present: np.ndarray  # L bools
    acoustic: np.ndarray
    acoustic_present: np.ndarray
    asr_ids: np.ndarray
    ocr_ids: np.ndarray
    target_ids: list[int]


def _load_stream(path, rate, seq: SequenceConfig, width, what):
    if path is None:
        return pad_stream(None, seq.L, width)
    arr = read_feature_file(path)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise FormatError(f"{path}: expected l x {width} features, got shape {arr.shape}")
    if arr.shape[0] == 0:
        return pad_stream(None, seq.L, width)
    arr = resample_to_clock(arr, rate, seq.reference_rate)
    return pad_stream(arr, seq.L, width, what=what)


def prepare_example(rec: SampleRecord, vocab: VocabSpec, model: ModelConfig, seq: SequenceConfig) -> Example:
    visual, vp = _load_stream(rec.visual, seq.visual_rate, seq, model.d_v, f"{rec.id} visual")
    acoustic, ap = _load_stream(rec.acoustic, seq.acoustic_rate, seq, model.d_a, f"{rec.id} acoustic")
    asr = tokenize(" ".join(read_tokens(rec.asr)), vocab)
    ocr = tokenize(" ".join(read_tokens(rec.ocr)), vocab)
    if len(ocr) > model.ocr_cap:
        warn_truncation(f"{rec.id} OCR stream", len(ocr), model.ocr_cap)
        ocr = ocr[: model.ocr_cap]
    text_steps = len(asr) + len(ocr)
    if text_steps:
        text_steps = len(resample_indices(text_steps, seq.text_rate, seq.reference_rate))
    if text_steps > seq.L:
        warn_truncation(f"{rec.id} textual stream", text_steps, seq.L)
    target = tokenize(rec.summary, vocab)
    if len(target) > seq.M_max:
        warn_truncation(f"{rec.id} target", len(target), seq.M_max)
        target = target[: seq.M_max]
    return Example(
        rec.id,
        visual,
        vp,
        acoustic,
        ap,
        np.array(asr, dtype=np.int64),
        np.array(ocr, dtype=np.int64),
        target,
    )


def corpus_texts(records: list[SampleRecord]):
    for rec in records:
        yield " ".join(read_tokens(rec.asr))
        yield " ".join(read_tokens(rec.ocr))
        yield rec.summary


def vocab_from_records(records: list[SampleRecord], min_frequency=1) -> VocabSpec:
    return build_vocab(corpus_texts(records), min_frequency)


def prepare_examples(records, vocab, model: ModelConfig, seq: SequenceConfig) -> list[Example]:
    return [prepare_example(r, vocab, model, seq) for r in records]
