import json
import struct
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsumm.config import ModelConfig, SequenceConfig
from mmsumm.errors import ContractError, FormatError, TruncationWarning
from mmsumm.modality import (
    RESERVED,
    VocabSpec,
    build_vocab,
    load_manifest,
    pad_and_assemble,
    read_feature_file,
    resample_to_clock,
    tokenize,
    write_feature_file,
    write_manifest,
)
from mmsumm.modality.dataset import prepare_example, prepare_examples, vocab_from_records
from mmsumm.modality.features import decode_features, encode_features
from mmsumm.modality.manifest import SampleRecord
from mmsumm.modality.synth import (
    CLASS_WORDS,
    directory_digest,
    gen_synthetic_dataset,
    get_profile,
    segment_labels,
)

# ---------------------------------------------------------------- feature files


def test_round_trip_2x3_bit_exact(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(2, 3) / 7
    write_feature_file(tmp_path / "a.flrt", a)
    raw = (tmp_path / "a.flrt").read_bytes()
    assert raw[:4] == b"FLRT" and struct.unpack("<III", raw[4:16]) == (1, 2, 2)
    back = read_feature_file(tmp_path / "a.flrt")
    assert back.astype(np.float32).tobytes() == a.tobytes()
    write_feature_file(tmp_path / "b.flrt", back)
    assert (tmp_path / "b.flrt").read_bytes() == raw


def test_empty_dims_legal():
    buf = encode_features(np.zeros((0,)))
    assert len(buf) == 16
    assert decode_features(buf).shape == (0,)


def test_truncated_payload_reports_byte_counts():
    buf = b"FLRT" + struct.pack("<III", 1, 2, 4) + struct.pack("<I", 4) + b"\0" * 32
    with pytest.raises(FormatError, match="32 bytes, expected 64"):
        decode_features(buf)


@pytest.mark.parametrize("buf", [b"XXXX" + b"\0" * 12, b"FLRT" + struct.pack("<II", 9, 0)])
def test_bad_magic_or_version(buf):
    with pytest.raises(FormatError):
        decode_features(buf)


def test_float64_version_is_exact():
    a = np.random.default_rng(0).normal(size=(3, 2))
    np.testing.assert_array_equal(decode_features(encode_features(a, version=2)), a)


# ---------------------------------------------------------------- resampling


def test_downsample_rows():
    seq = np.arange(10.0)[:, None]
    np.testing.assert_array_equal(resample_to_clock(seq, 10, 5)[:, 0], [0, 2, 4, 6, 8])


def test_upsample_rows():
    seq = np.arange(3.0)[:, None]
    np.testing.assert_array_equal(resample_to_clock(seq, 1, 2)[:, 0], [0, 0, 1, 1, 2, 2])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(0.1, 50))
def test_equal_rates_identity(n, rate):
    seq = np.random.default_rng(n).normal(size=(n, 2))
    out = resample_to_clock(seq, rate, rate)
    np.testing.assert_array_equal(out, seq)
    np.testing.assert_array_equal(resample_to_clock(out, rate, rate), out)


def test_bad_rate():
    with pytest.raises(ContractError):
        resample_to_clock(np.zeros((2, 1)), 0, 1)


# ---------------------------------------------------------------- assembly


def _projections(rng, d_b=4, widths=(3, 2, 5)):
    names = ("visual", "acoustic", "textual")
    return {n: (rng.normal(size=(w, d_b)), rng.normal(size=d_b)) for n, w in zip(names, widths)}


def test_full_streams_no_padding():
    rng = np.random.default_rng(1)
    p = _projections(rng)
    s = pad_and_assemble(rng.normal(size=(5, 3)), rng.normal(size=(5, 2)), rng.normal(size=(5, 5)), 5, p)
    assert s.x.shape == (5, 12) and not s.pad_mask.any()


def test_empty_acoustic_block_is_zero():
    rng = np.random.default_rng(2)
    p = _projections(rng)
    s = pad_and_assemble(rng.normal(size=(5, 3)), None, rng.normal(size=(5, 5)), 5, p)
    assert np.all(s.x[:, 4:8] == 0)


def test_short_visual_zero_tail_and_projection():
    rng = np.random.default_rng(3)
    p = _projections(rng)
    v = rng.normal(size=(3, 3))
    s = pad_and_assemble(v, None, None, 5, p)
    assert np.all(s.x[3:, :4] == 0)
    np.testing.assert_allclose(s.x[:3, :4], v @ p["visual"][0] + p["visual"][1], atol=1e-14)
    np.testing.assert_array_equal(s.pad_mask, [False] * 3 + [True] * 2)
    assert np.abs(s.x[s.pad_mask]).max() == 0


def test_long_stream_truncates_with_warning():
    rng = np.random.default_rng(4)
    with pytest.warns(TruncationWarning):
        s = pad_and_assemble(rng.normal(size=(7, 3)), None, None, 5, _projections(rng))
    assert s.x.shape == (5, 12)


# ---------------------------------------------------------------- vocabulary


def test_min_frequency_threshold():
    v = build_vocab("a a b", min_frequency=2)
    assert "a" in v and "b" not in v
    assert tokenize("a b", v) == [v.id("a"), RESERVED.index("<unk>")]


def test_tokenize_empty_and_case():
    v = build_vocab("Hello world")
    assert tokenize("", v) == []
    assert tokenize("HELLO", v) == [v.id("hello")]


def test_reserved_survive_round_trip(tmp_path):
    v = build_vocab(["x y", "y z"])
    v.save(tmp_path / "v.json")
    w = VocabSpec.load(tmp_path / "v.json")
    assert w.token_to_id == v.token_to_id
    assert [w.id(t) for t in RESERVED] == [0, 1, 2, 3, 4]


def test_vocab_order_is_count_then_alpha():
    v = build_vocab("b a c c")
    assert v.id_to_token[5:] == ["c", "a", "b"]


def test_vocab_rejects_remapped_reserved():
    with pytest.raises(FormatError):
        VocabSpec({"<pad>": 1, "<bos>": 0, "<stop>": 2, "<delim>": 3, "<unk>": 4})


def test_empty_corpus():
    with pytest.raises(ContractError):
        build_vocab([])


# ---------------------------------------------------------------- manifests


def test_manifest_order_and_missing_file(tmp_path):
    (tmp_path / "a.txt").write_text("x\n")
    recs = [SampleRecord(f"s{i}", None, None, "a.txt", None, "x") for i in (3, 1, 2)]
    write_manifest(tmp_path / "m.json", recs)
    assert [r.id for r in load_manifest(tmp_path / "m.json")] == ["s3", "s1", "s2"]
    recs.append(SampleRecord("s9", "missing.flrt", None, None, None, "x"))
    write_manifest(tmp_path / "m.json", recs)
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "m.json")


def test_manifest_unknown_field(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps([{"id": "a", "summary": "x", "extra": 1}]))
    with pytest.raises(FormatError):
        load_manifest(tmp_path / "m.json")


# ---------------------------------------------------------------- synthetic data


def test_seed_determinism(tmp_path):
    gen_synthetic_dataset(5, 7, get_profile("toy"), tmp_path / "a")
    gen_synthetic_dataset(5, 7, get_profile("toy"), tmp_path / "b")
    assert directory_digest(tmp_path / "a") == directory_digest(tmp_path / "b")
    gen_synthetic_dataset(5, 8, get_profile("toy"), tmp_path / "c")
    assert directory_digest(tmp_path / "a") != directory_digest(tmp_path / "c")


def test_visual_dominant_sample_is_all_visual():
    v = np.full((16, 4), 2.0)
    a = np.full((16, 4), 0.1)
    assert segment_labels(v, a, np.full(16, 0.5), 4) == [0, 0, 0, 0]


def test_class_distribution_roughly_uniform(tmp_path):
    recs = gen_synthetic_dataset(1000, 3, get_profile("toy"), tmp_path)
    counts = Counter(tok for r in recs for tok in r.summary.split())
    total = sum(counts.values())
    for word in CLASS_WORDS:
        assert abs(counts[word] / total - 1 / 3) < 0.1 / 3


def test_labels_follow_stored_features(tmp_path):
    """Recompute every label from the files on disk."""
    prof = get_profile("toy")
    recs = gen_synthetic_dataset(20, 5, prof, tmp_path)
    for r in recs:
        v = resample_to_clock(read_feature_file(r.visual), prof.visual_rate, 1.0)[:16]
        a = resample_to_clock(read_feature_file(r.acoustic), prof.acoustic_rate, 1.0)[:16]
        asr = open(r.asr).read().split()
        ocr = open(r.ocr).read().split()
        amp = [2.5 if t.startswith("sal") else 0.5 for t in asr]
        amp += [0.0 if t in asr else (2.5 if t.startswith("sal") else 0.5) for t in ocr]
        want = []
        for s in range(4):
            sl = slice(4 * s, 4 * s + 4)
            norms = [np.linalg.norm(v[sl], axis=1).mean(), np.linalg.norm(a[sl], axis=1).mean(), np.mean(amp[sl])]
            want.append(CLASS_WORDS[int(np.argmax(np.round(norms, 9)))])
        assert r.summary.split() == want
        assert len(asr) == 12 and len(ocr) == 4


def test_redundant_variant_has_half_duplicates(tmp_path):
    recs = gen_synthetic_dataset(30, 6, get_profile("toy", redundant_fraction=0.5), tmp_path)
    for r in recs:
        asr = open(r.asr).read().split()
        ocr = open(r.ocr).read().split()
        assert sum(t in asr for t in ocr) == 2
        assert r.summary.split()[-1] in ("visual", "textual")


def test_ocr_mixes_duplicates_and_novel(tmp_path):
    recs = gen_synthetic_dataset(50, 9, get_profile("toy"), tmp_path)
    dup = novel = 0
    for r in recs:
        asr = set(open(r.asr).read().split())
        for t in open(r.ocr).read().split():
            dup += t in asr
            novel += t not in asr
    assert dup > 0 and novel > 0


def test_zero_samples(tmp_path):
    assert gen_synthetic_dataset(0, 1, get_profile("toy"), tmp_path) == []
    assert load_manifest(tmp_path / "manifest.json") == []


# ---------------------------------------------------------------- examples


def test_prepare_examples_shapes(tmp_path):
    recs = gen_synthetic_dataset(3, 2, get_profile("toy"), tmp_path)
    vocab = vocab_from_records(recs)
    assert len(vocab) == 5 + 3 + len({t for r in recs for f in (r.asr, r.ocr) for t in open(f).read().split()})
    exs = prepare_examples(recs, vocab, ModelConfig(), SequenceConfig())
    for e in exs:
        assert e.visual.shape == (16, 16) and e.visual_present.all()
        assert e.acoustic.shape == (16, 16) and e.acoustic_present.all()
        assert len(e.asr_ids) == 12 and len(e.ocr_ids) == 4 and len(e.target_ids) == 4


def test_long_target_truncates(tmp_path):
    (tmp_path / "t.txt").write_text("a b\n")
    rec = SampleRecord("x", None, None, str(tmp_path / "t.txt"), None, "a b a b a b")
    vocab = build_vocab("a b")
    with pytest.warns(TruncationWarning):
        ex = prepare_example(rec, vocab, ModelConfig(), SequenceConfig(M_max=4))
    assert len(ex.target_ids) == 4


def test_too_many_text_steps_warns(tmp_path):
    (tmp_path / "t.txt").write_text(" ".join(["a"] * 20))
    rec = SampleRecord("x", None, None, str(tmp_path / "t.txt"), None, "a")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prepare_example(rec, build_vocab("a"), ModelConfig(), SequenceConfig())
    assert any(issubclass(w.category, TruncationWarning) for w in caught)
