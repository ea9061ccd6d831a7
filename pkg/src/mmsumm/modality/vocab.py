from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from mmsumm.errors import ContractError, FormatError

PAD, BOS, STOP, DELIM, UNK = "<pad>", "<bos>", "<stop>", "<delim>", "<unk>"
RESERVED = (PAD, BOS, STOP, DELIM, UNK)
PAD_ID, BOS_ID, STOP_ID, DELIM_ID, UNK_ID = range(5)


def split_tokens(text: str) -> list[str]:
    """Lowercase whitespace tokenization, shared by the vocabulary and ROUGE."""
    return text.lower().split()


@dataclass
class VocabSpec:
    token_to_id: dict[str, int]
    min_frequency: int = 1
    id_to_token: list[str] = field(init=False, repr=False)

    def __post_init__(self):
        for i, tok in enumerate(RESERVED):
            if self.token_to_id.get(tok) != i:
                raise FormatError(f"reserved token {tok!r} must have id {i}")
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise FormatError("vocabulary ids must be dense from 0")
        self.id_to_token = [""] * len(ids)
        for tok, i in self.token_to_id.items():
            self.id_to_token[i] = tok

    def __len__(self):
        return len(self.token_to_id)

    def __contains__(self, token):
        return token in self.token_to_id

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def to_json(self) -> str:
        return json.dumps(self.token_to_id, indent=0, sort_keys=False)

    @classmethod
    def from_json(cls, text: str, min_frequency: int = 1) -> "VocabSpec":
        table = json.loads(text)
        if not isinstance(table, dict):
            raise FormatError("vocabulary JSON must be an object of token -> id")
        return cls({str(k): int(v) for k, v in table.items()}, min_frequency)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "VocabSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_vocab(corpus: str | Iterable[str], min_frequency: int = 1) -> VocabSpec:
    """Count lowercase whitespace tokens; keep those seen ``min_frequency`` times.

    Kept tokens are numbered after the reserved ones by descending count, ties
    broken alphabetically, so the table is a pure function of the corpus.
    """
    texts = [corpus] if isinstance(corpus, str) else list(corpus)
    if not texts:
        raise ContractError("corpus must be non-empty")
    counts = Counter(tok for text in texts for tok in split_tokens(text))
    kept = sorted(
        (t for t, c in counts.items() if c >= min_frequency and t not in RESERVED),
        key=lambda t: (-counts[t], t),
    )
    table = {tok: i for i, tok in enumerate(RESERVED)}
    for tok in kept:
        table[tok] = len(table)
    return VocabSpec(table, min_frequency)


def tokenize(text: str, vocab: VocabSpec) -> list[int]:
    return [vocab.id(tok) for tok in split_tokens(text)]
