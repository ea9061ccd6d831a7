"""ROUGE-1, ROUGE-2 and ROUGE-L with corpus aggregation.

Tokens come from the same lowercase whitespace split used for vocabularies.
No stemming, no stopword removal. ROUGE-L uses one LCS over the whole
summary and an unweighted harmonic mean.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from mmsumm.errors import ContractError, FormatError
from mmsumm.modality.vocab import split_tokens

METRICS = ("rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


ZERO = Score(0.0, 0.0, 0.0, True)


def _tokens(text_or_tokens):
    if isinstance(text_or_tokens, str):
        return split_tokens(text_or_tokens)
    return list(text_or_tokens)


def f_measure(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n: int) -> Score:
    """Clipped n-gram overlap. Too-short inputs score 0 and are flagged degenerate."""
    if n not in (1, 2):
        raise ContractError(f"rouge_n supports n in (1, 2), got {n}")
    cand, ref = _tokens(candidate), _tokens(reference)
    if len(ref) < n or len(cand) < n:
        return ZERO
    c, r = ngrams(cand, n), ngrams(ref, n)
    overlap = sum((c & r).values())
    p = overlap / sum(c.values())
    rec = overlap / sum(r.values())
    return Score(p, rec, f_measure(p, rec))


def lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> Score:
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        return ZERO
    ell = lcs_length(cand, ref)
    p, r = ell / len(cand), ell / len(ref)
    return Score(p, r, f_measure(p, r))


def score_pair(candidate, reference) -> dict:
    cand, ref = _tokens(candidate), _tokens(reference)
    return {
        "rouge1": rouge_n(cand, ref, 1),
        "rouge2": rouge_n(cand, ref, 2),
        "rougeL": rouge_l(cand, ref),
    }


@dataclass
class RougeReport:
    per_sample: list[dict]
    mean: dict
    candidate_lengths: list[int]
    reference_lengths: list[int]
    length_histogram: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n": len(self.per_sample),
            "mean": {k: asdict(v) for k, v in self.mean.items()},
            "per_sample": [{k: asdict(v) for k, v in s.items()} for s in self.per_sample],
            "lengths": {
                "candidate": self.candidate_lengths,
                "reference": self.reference_lengths,
                "histogram": self.length_histogram,
            },
        }


def _histogram(lengths):
    counts = Counter(lengths)
    return {str(k): counts[k] for k in sorted(counts)}


def evaluate_pairs(candidates, references) -> RougeReport:
    candidates, references = list(candidates), list(references)
    if len(candidates) != len(references):
        raise FormatError(f"{len(candidates)} candidates vs {len(references)} references")
    cand_toks = [_tokens(c) for c in candidates]
    ref_toks = [_tokens(r) for r in references]
    per = [score_pair(c, r) for c, r in zip(cand_toks, ref_toks)]
    mean = {}
    for m in METRICS:
        if per:
            mean[m] = Score(
                float(np.mean([s[m].precision for s in per])),
                float(np.mean([s[m].recall for s in per])),
                float(np.mean([s[m].f1 for s in per])),
                all(s[m].degenerate for s in per),
            )
        else:
            mean[m] = ZERO
    clen = [len(t) for t in cand_toks]
    rlen = [len(t) for t in ref_toks]
    hist = {"candidate": _histogram(clen), "reference": _histogram(rlen)}
    return RougeReport(per, mean, clen, rlen, hist)


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def evaluate_corpus(hyp_file, ref_file) -> RougeReport:
    """Score line-aligned hypothesis and reference files, one summary per line."""
    hyps, refs = _read_lines(hyp_file), _read_lines(ref_file)
    if len(hyps) != len(refs):
        raise FormatError(f"{hyp_file} has {len(hyps)} lines but {ref_file} has {len(refs)}")
    return evaluate_pairs(hyps, refs)
