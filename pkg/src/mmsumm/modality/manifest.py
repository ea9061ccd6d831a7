from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from mmsumm.errors import FormatError

FIELDS = ("id", "visual", "acoustic", "asr", "ocr", "summary")


@dataclass
class SampleRecord:
    id: str
    visual: str | None
    acoustic: str | None
    asr: str | None
    ocr: str | None
    summary: str

    def resolved(self, root: Path) -> "SampleRecord":
        def fix(p):
            return None if p is None else os.fspath(root / p)

        return SampleRecord(
            self.id, fix(self.visual), fix(self.acoustic), fix(self.asr), fix(self.ocr), self.summary
        )


def load_manifest(path, check_files=True) -> list[SampleRecord]:
    """Read a manifest; relative paths resolve against the manifest's directory.

    Sample order is the order of the JSON array.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, list):
        raise FormatError(f"{path}: manifest must be a JSON array")
    records = []
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or "id" not in item or "summary" not in item:
            raise FormatError(f"{path}: record {i} needs at least 'id' and 'summary'")
        unknown = set(item) - set(FIELDS)
        if unknown:
            raise FormatError(f"{path}: record {i} has unknown fields {sorted(unknown)}")
        rec = SampleRecord(**{k: item.get(k) for k in FIELDS}).resolved(path.parent)
        if check_files:
            for p in (rec.visual, rec.acoustic, rec.asr, rec.ocr):
                if p is not None and not os.path.exists(p):
                    raise FileNotFoundError(f"{path}: sample {rec.id} references missing file {p}")
        records.append(rec)
    return records


def write_manifest(path, records: list[SampleRecord]):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in records], fh, indent=1)
        fh.write("\n")


def read_tokens(path) -> list[str]:
    if path is None:
        return []
    with open(path, encoding="utf-8") as fh:
        return fh.read().split()
