"""Seed-deterministic synthetic corpus with a known summarization rule.

The source is cut into ``M`` equal segments on the reference clock. For each
segment the summary emits the class word (``visual``, ``acoustic`` or
``textual``) of the modality whose rows have the largest mean norm there.
Visual and acoustic rows are random positive-orthant directions scaled to
a per-segment amplitude. A text token's norm is its nominal amplitude: ``salNN`` tokens are
strong, ``plnNN`` tokens weak. ASR tokens cover all but the last segment; the
OCR tokens fill the last one, and an OCR token that repeats an ASR token
counts as zero (it carries nothing new once redundancy is filtered).

With ``redundant_fraction`` set (the ablation variant), the last segment's
visual and acoustic amplitudes are pinned to a tie, so only the redundancy-filtered
OCR content decides between ``textual`` and ``visual`` there.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from mmsumm.modality.align import resample_to_clock
from mmsumm.modality.features import write_feature_file
from mmsumm.modality.manifest import SampleRecord, write_manifest

CLASS_WORDS = ("visual", "acoustic", "textual")
STRONG, WEAK, TIE = 2.5, 0.5, 1.0
TIE_TOL = 1e-9  # norms this close count as tied (rounding in row normalization)
N_POOL = 12
ASR_POOL = 9  # ASR draws from the first 9 of each pool so novel OCR tokens always exist

SALIENT = tuple(f"sal{i:02d}" for i in range(N_POOL))
PLAIN = tuple(f"pln{i:02d}" for i in range(N_POOL))


@dataclass(frozen=True)
class SynthProfile:
    L: int = 16
    M: int = 4
    d_v: int = 16
    d_a: int = 16
    reference_rate: float = 1.0
    visual_rate: float = 0.5
    acoustic_rate: float = 2.0
    redundant_fraction: float | None = None
    text_only: bool = False

    @property
    def seg_len(self):
        return self.L // self.M

    def validate(self):
        if self.L % self.M or self.seg_len < 2:
            raise ValueError("L must split into M segments of at least 2 steps")
        if self.M < 2:
            raise ValueError("need at least 2 segments (one for OCR)")


PROFILES = {
    "toy": SynthProfile(),
    "full": SynthProfile(L=64, M=8, d_v=2048, d_a=512),
}


def get_profile(name: str, **overrides) -> SynthProfile:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return replace(base, **overrides)


def token_amplitude(token: str) -> float:
    return STRONG if token.startswith("sal") else WEAK


def _rows(rng, n, width, amps):
    # Directions come from the positive orthant so a segment's mean row keeps
    # its amplitude; Gaussian directions would average out under a linear map.
    d = np.abs(rng.normal(size=(n, width)))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * np.asarray(amps)[:, None]


def segment_labels(visual, acoustic, text_amp, M) -> list[int]:
    """Class index per segment from streams already on the reference clock.

    ``text_amp`` holds the effective norm of each textual timestep. Ties go to
    the earlier class in (visual, acoustic, textual) order; norms within
    ``TIE_TOL`` of each other count as equal.
    """
    L = len(text_amp)
    seg = L // M
    labels = []
    for t in range(M):
        sl = slice(t * seg, (t + 1) * seg)
        norms = [
            np.linalg.norm(visual[sl], axis=1).mean() if len(visual) else 0.0,
            np.linalg.norm(acoustic[sl], axis=1).mean() if len(acoustic) else 0.0,
            float(np.mean(text_amp[sl])),
        ]
        top = max(norms)
        labels.append(next(i for i, n in enumerate(norms) if n >= top - TIE_TOL))
    return labels


def ocr_effective_amplitudes(asr: list[str], ocr: list[str]) -> list[float]:
    seen = set(asr)
    return [0.0 if tok in seen else token_amplitude(tok) for tok in ocr]


def _source_rows(length_ref, rate, ref):
    # number of source rows whose nearest-previous resampling spans length_ref steps
    return int(np.ceil(length_ref * rate / ref))


def make_sample(rng: np.random.Generator, profile: SynthProfile):
    """Draw one sample. Returns (visual, acoustic, asr, ocr, classes)."""
    p = profile
    seg, M, L = p.seg_len, p.M, p.L
    classes = [int(c) for c in rng.integers(0, 3, size=M)]
    variant = p.redundant_fraction is not None
    if variant:
        classes[-1] = 2 if rng.random() < 0.5 else 0

    v_amp = np.where(np.array(classes) == 0, STRONG, WEAK)
    a_amp = np.where(np.array(classes) == 1, STRONG, WEAK)
    if variant:
        v_amp[-1] = a_amp[-1] = TIE

    # per-row amplitude: the segment of the first reference step that reads the row
    def stream(rate, width, amps):
        n = _source_rows(L, rate, p.reference_rate)
        first_step = np.floor(np.arange(n) * p.reference_rate / rate).astype(int)
        return _rows(rng, n, width, amps[np.minimum(first_step // seg, M - 1)])

    visual = stream(p.visual_rate, p.d_v, v_amp)
    acoustic = stream(p.acoustic_rate, p.d_a, a_amp)

    asr = []
    for c in classes[:-1]:
        pool = SALIENT if c == 2 else PLAIN
        asr += [pool[i] for i in rng.integers(0, ASR_POOL, size=seg)]

    n_dup = int(round(seg * p.redundant_fraction)) if variant else int(rng.integers(0, seg))
    n_novel = seg - n_dup
    salient_asr = [t for t in asr if t.startswith("sal")]
    plain_asr = [t for t in asr if t.startswith("pln")]
    dups = []
    for _ in range(n_dup):
        use_salient = salient_asr and (not plain_asr or rng.random() < 0.5)
        src = salient_asr if use_salient else plain_asr
        dups.append(src[int(rng.integers(0, len(src)))])
    fresh_sal = [t for t in SALIENT if t not in asr]
    fresh_pln = [t for t in PLAIN if t not in asr]
    last = classes[-1]
    if last == 2:
        n_strong = n_novel
    elif variant:
        n_strong = 1
    else:
        n_strong = 0
    novel = [fresh_sal[int(rng.integers(0, len(fresh_sal)))] for _ in range(n_strong)]
    novel += [fresh_pln[int(rng.integers(0, len(fresh_pln)))] for _ in range(n_novel - n_strong)]
    ocr = dups + novel
    ocr = [ocr[i] for i in rng.permutation(len(ocr))]

    if p.text_only:
        visual = np.zeros((0, p.d_v))
        acoustic = np.zeros((0, p.d_a))
    return visual, acoustic, asr, ocr, classes


def expected_classes(visual, acoustic, asr, ocr, profile: SynthProfile) -> list[int]:
    p = profile
    v = resample_to_clock(visual, p.visual_rate, p.reference_rate)[: p.L] if len(visual) else visual
    a = resample_to_clock(acoustic, p.acoustic_rate, p.reference_rate)[: p.L] if len(acoustic) else acoustic
    text_amp = [token_amplitude(t) for t in asr] + ocr_effective_amplitudes(asr, ocr)
    return segment_labels(v, a, np.array(text_amp[: p.L]), p.M)


def text_only_summary(asr, ocr, profile):
    """Target for text-only pretraining data: the first token of each segment."""
    stream = (asr + ocr)[: profile.L]
    return [stream[t * profile.seg_len] for t in range(profile.M)]


def gen_synthetic_dataset(n_samples: int, rng, profile: SynthProfile, out_dir) -> list[SampleRecord]:
    """Write ``n_samples`` samples plus ``manifest.json`` under ``out_dir``.

    ``rng`` is a seed or a numpy Generator (PCG64). Output is byte-identical
    for identical seeds.
    """
    profile.validate()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "text").mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n_samples):
        sid = f"s{i:05d}"
        visual, acoustic, asr, ocr, classes = make_sample(rng, profile)
        if profile.text_only:
            summary = " ".join(text_only_summary(asr, ocr, profile))
            vpath = apath = None
        else:
            got = expected_classes(visual, acoustic, asr, ocr, profile)
            assert got == classes, (sid, got, classes)
            summary = " ".join(CLASS_WORDS[c] for c in classes)
            vpath, apath = f"features/{sid}.visual.flrt", f"features/{sid}.acoustic.flrt"
            write_feature_file(out / vpath, visual)
            write_feature_file(out / apath, acoustic)
        for name, toks in (("asr", asr), ("ocr", ocr)):
            with open(out / f"text/{sid}.{name}.txt", "w", encoding="utf-8") as fh:
                fh.write(" ".join(toks) + "\n")
        records.append(
            SampleRecord(sid, vpath, apath, f"text/{sid}.asr.txt", f"text/{sid}.ocr.txt", summary)
        )
    write_manifest(out / "manifest.json", records)
    return [r.resolved(out) for r in records]


def directory_digest(root) -> str:
    """SHA-256 over relative paths and contents of every file under ``root``."""
    import hashlib

    h = hashlib.sha256()
    root = Path(root)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(os.fspath(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()
