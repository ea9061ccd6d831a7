"""Workflows over a data directory: split, train, summarize, score.

These glue the library together the same way the command line does, so
scripts and tests can drive whole runs without a subprocess.
"""

from __future__ import annotations

import logging
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mmsumm import lm
from mmsumm.config import RunConfig, profile_config
from mmsumm.errors import ContractError
from mmsumm.modality.dataset import Example, prepare_example, prepare_examples, vocab_from_records
from mmsumm.modality.manifest import SampleRecord, load_manifest
from mmsumm.modality.synth import gen_synthetic_dataset, get_profile
from mmsumm.modality.vocab import VocabSpec
from mmsumm.model import FmtModel, load_checkpoint
from mmsumm.rouge import evaluate_pairs

log = logging.getLogger(__name__)


def manifest_path(data_dir) -> Path:
    return Path(data_dir) / "manifest.json"


def split_records(records: list[SampleRecord], val_fraction: float, seed: int):
    """Deterministic train/validation split; validation keeps manifest order."""
    n_val = int(math.floor(len(records) * val_fraction))
    if n_val == 0:
        return list(records), []
    chosen = set(np.random.default_rng([seed, 0x5A]).permutation(len(records))[:n_val].tolist())
    train = [r for i, r in enumerate(records) if i not in chosen]
    val = [r for i, r in enumerate(records) if i in chosen]
    return train, val


@dataclass
class TrainOutcome:
    result: lm.TrainResult
    model: FmtModel
    vocab: VocabSpec
    train: list[Example]
    val: list[Example]
    out_dir: Path


def train_on_directory(config: RunConfig, data_dir, out_dir, val_dir=None) -> TrainOutcome:
    """Train from a manifest directory, holding out ``val_fraction`` (or using ``val_dir``)."""
    records = load_manifest(manifest_path(data_dir))
    if not records:
        raise ContractError(f"{data_dir}: dataset is empty")
    if val_dir is not None:
        train_recs, val_recs = records, load_manifest(manifest_path(val_dir))
    else:
        train_recs, val_recs = split_records(records, config.training.val_fraction, config.seed)
    vocab = vocab_from_records(train_recs, config.training.min_frequency)
    train = prepare_examples(train_recs, vocab, config.model, config.sequence)
    val = prepare_examples(val_recs, vocab, config.model, config.sequence)
    model = FmtModel.init(config.model, config.sequence, len(vocab), config.seed)
    log.info("training %d parameters on %d samples (%d held out)", model.parameter_count(), len(train), len(val))
    result = lm.train(model, train, val, config, vocab, out_dir)
    return TrainOutcome(result, model, vocab, train, val, Path(out_dir))


def summarize_records(model: FmtModel, vocab: VocabSpec, records, max_len: int, batch_size=64):
    """Greedy summaries as ``[(id, token ids, text)]`` in record order."""
    examples = [prepare_example(r, vocab, model.config, model.seq) for r in records]
    out = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        for ex, ids in zip(chunk, lm.generate_batch(model, chunk, max_len)):
            out.append((ex.id, ids, " ".join(vocab.decode(ids))))
    return out


def summarize_from_checkpoint(ckpt, data_dir, sample_ids, max_len: int):
    loaded = load_checkpoint(ckpt)
    data_dir = data_dir or loaded.config.paths.data
    if data_dir is None:
        raise ContractError("no data directory given and none recorded in the checkpoint config")
    by_id = {r.id: r for r in load_manifest(manifest_path(data_dir))}
    missing = [s for s in sample_ids if s not in by_id]
    if missing:
        raise ContractError(f"sample ids not in {data_dir}: {missing}")
    return summarize_records(loaded.model, loaded.vocab, [by_id[s] for s in sample_ids], max_len)


def score_examples(model: FmtModel, vocab: VocabSpec, examples: list[Example], max_len=None):
    """Token accuracy and corpus ROUGE of greedy output against example targets."""
    max_len = model.seq.M_max if max_len is None else max_len
    preds = []
    for start in range(0, len(examples), 64):
        preds += lm.generate_batch(model, examples[start : start + 64], max_len)
    targets = [e.target_ids for e in examples]
    report = evaluate_pairs([vocab.decode(p) for p in preds], [vocab.decode(t) for t in targets])
    return lm.token_accuracy(preds, targets), report, preds


def toy_gradient_batch(seed=0, n_samples=2, config: RunConfig | None = None):
    """Toy model plus a small synthetic batch for full-model gradient checks."""
    config = config or profile_config("toy")
    with tempfile.TemporaryDirectory() as tmp:
        records = gen_synthetic_dataset(n_samples, seed, get_profile("toy"), tmp)
        vocab = vocab_from_records(records)
        examples = prepare_examples(records, vocab, config.model, config.sequence)
    model = FmtModel.init(config.model, config.sequence, len(vocab), seed)
    return model, lm.make_batch(examples, config.sequence.L)
