"""Feature files, manifests, vocabulary, clock alignment and synthetic data."""

from mmsumm.modality.align import (
    AlignedSample,
    pad_and_assemble,
    pad_stream,
    resample_indices,
    resample_to_clock,
)
from mmsumm.modality.features import read_feature_file, write_feature_file
from mmsumm.modality.manifest import SampleRecord, load_manifest, read_tokens, write_manifest
from mmsumm.modality.synth import SynthProfile, gen_synthetic_dataset, get_profile
from mmsumm.modality.vocab import RESERVED, VocabSpec, build_vocab, split_tokens, tokenize

__all__ = [
    "RESERVED",
    "AlignedSample",
    "SampleRecord",
    "SynthProfile",
    "VocabSpec",
    "build_vocab",
    "gen_synthetic_dataset",
    "get_profile",
    "load_manifest",
    "pad_and_assemble",
    "pad_stream",
    "read_feature_file",
    "read_tokens",
    "resample_indices",
    "resample_to_clock",
    "split_tokens",
    "tokenize",
    "write_feature_file",
    "write_manifest",
]
