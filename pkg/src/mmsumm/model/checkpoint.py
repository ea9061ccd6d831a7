"""Checkpoint directories.

Layout::

    config.json        effective RunConfig
    vocab.json         token -> id
    params/index.json  {name: {"file": ..., "shape": [...]}, ...}
    params/*.flrt      one feature file (float64 payload) per parameter
    optim/m/*.flrt, optim/v/*.flrt, optim/index.json   Adam moments (optional)
    state.json         {"step": ..., "best_val": ..., "vocab_size": ...}

Every file is written deterministically so identical runs give identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from mmsumm.autodiff import Tensor
from mmsumm.config import RunConfig
from mmsumm.errors import FormatError
from mmsumm.modality.features import read_feature_file, write_feature_file
from mmsumm.modality.vocab import VocabSpec
from mmsumm.model.fmt import FmtModel
from mmsumm.model.params import param_layout

PARAM_VERSION = 2


@dataclass
class Checkpoint:
    model: FmtModel
    config: RunConfig
    vocab: VocabSpec
    optimizer: object | None
    train_state: dict


def _write_table(root: Path, arrays: dict):
    root.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, arr in arrays.items():
        fname = f"{name}.flrt"
        write_feature_file(root / fname, arr, version=PARAM_VERSION)
        index[name] = {"file": fname, "shape": list(arr.shape)}
    with open(root / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_table(root: Path, expected_shapes: dict) -> dict:
    with open(root / "index.json", encoding="utf-8") as fh:
        index = json.load(fh)
    if set(index) != set(expected_shapes):
        missing = sorted(set(expected_shapes) - set(index))
        extra = sorted(set(index) - set(expected_shapes))
        raise FormatError(f"{root}: parameter names differ (missing {missing}, unexpected {extra})")
    out = {}
    for name, shape in expected_shapes.items():
        entry = index[name]
        if list(entry["shape"]) != list(shape):
            raise FormatError(f"{root}: {name} has shape {entry['shape']}, expected {list(shape)}")
        arr = read_feature_file(root / entry["file"])
        if list(arr.shape) != list(shape):
            raise FormatError(f"{root}: {entry['file']} holds shape {list(arr.shape)}, expected {list(shape)}")
        out[name] = arr
    return out


def save_checkpoint(path, model: FmtModel, config: RunConfig, vocab: VocabSpec, optimizer=None, train_state=None):
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "config.json", "w", encoding="utf-8") as fh:
        fh.write(config.to_json() + "\n")
    vocab.save(root / "vocab.json")
    _write_table(root / "params", {k: p.data for k, p in model.params.items()})
    state = dict(train_state or {})
    state["vocab_size"] = model.vocab_size
    if optimizer is not None:
        _write_table(root / "optim" / "m", optimizer.m)
        _write_table(root / "optim" / "v", optimizer.v)
        state["optimizer_step"] = optimizer.step
    with open(root / "state.json", "w", encoding="utf-8") as fh:
        json.dump(state, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    from mmsumm.lm import AdamState

    root = Path(path)
    if (root / "best" / "config.json").exists() and not (root / "config.json").exists():
        root = root / "best"
    with open(root / "config.json", encoding="utf-8") as fh:
        config = RunConfig.from_json(fh.read())
    vocab = VocabSpec.load(root / "vocab.json")
    with open(root / "state.json", encoding="utf-8") as fh:
        state = json.load(fh)
    layout = param_layout(config.model, config.sequence, state["vocab_size"])
    shapes = {k: shape for k, (shape, _) in layout.items()}
    arrays = _read_table(root / "params", shapes)
    params = {k: Tensor(arrays[k], requires_grad=True, name=k) for k in layout}
    model = FmtModel(config.model, config.sequence, state["vocab_size"], params)
    optimizer = None
    if (root / "optim").exists():
        optimizer = AdamState(
            state["optimizer_step"],
            _read_table(root / "optim" / "m", shapes),
            _read_table(root / "optim" / "v", shapes),
        )
    return Checkpoint(model, config, vocab, optimizer, state)
