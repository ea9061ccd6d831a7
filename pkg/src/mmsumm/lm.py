"""Decoder-only summarization: sequence layout, training loop and greedy decoding.

A sequence is the multimodal source (``L`` steps) followed by a delimiter,
the summary tokens and a stop token. Appended positions carry the token
embedding in the textual block and zeros in the visual and acoustic blocks.
Only predictions of summary tokens and the stop token are scored.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mmsumm.autodiff import Tape, Tensor, ops
from mmsumm.config import RunConfig, TrainConfig
from mmsumm.errors import ContractError, NumericError
from mmsumm.fusion import fuse
from mmsumm.modality.align import (
    AlignedSample,
    pad_tensor_stream,
    project_blocks,
    resample_indices,
    warn_truncation,
)
from mmsumm.modality.dataset import Example
from mmsumm.modality.vocab import DELIM_ID, PAD_ID, STOP_ID, VocabSpec
from mmsumm.model.fmt import FmtModel, fmt_forward, head_logits

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- layout


def lm_layout(L: int, target_ids=None, M_max: int | None = None):
    """Token layout of the appended region and the per-position loss targets.

    Returns ``(appended, labels, loss_mask)`` where ``appended`` is
    ``[<delim>, t1, .., tM, <stop>]`` (just ``[<delim>]`` without a target)
    and ``labels``/``loss_mask`` have one entry per position of the full
    ``L + len(appended)`` sequence.
    """
    target = [] if target_ids is None else list(target_ids)
    if M_max is not None and len(target) > M_max:
        warn_truncation("target", len(target), M_max)
        target = target[:M_max]
    appended = [DELIM_ID] + target + ([STOP_ID] if target_ids is not None else [])
    total = L + len(appended)
    labels = np.zeros(total, dtype=np.int64)
    loss_mask = np.zeros(total, dtype=bool)
    if target_ids is not None:
        for j in range(len(appended) - 1):
            labels[L + j] = appended[j + 1]
            loss_mask[L + j] = True
    return appended, labels, loss_mask


@dataclass
class LmSequence:
    blocks: np.ndarray  # L' x d_x
    tokens: list[int]  # appended region, starting with <delim>
    labels: np.ndarray  # next-token label per position
    loss_mask: np.ndarray
    pad_mask: np.ndarray

    @property
    def length(self):
        return self.blocks.shape[0]


def build_lm_sequence(sample: AlignedSample, target_ids, token_embedding, M_max=None) -> LmSequence:
    """Lay out one assembled sample as an LM sequence (numpy, no tape)."""
    L, d_x = sample.x.shape
    emb = np.asarray(getattr(token_embedding, "data", token_embedding))
    d_b = d_x // 3
    appended, labels, loss_mask = lm_layout(L, target_ids, M_max)
    extra = np.zeros((len(appended), d_x))
    extra[:, 2 * d_b :] = emb[appended]
    pad = np.concatenate([sample.pad_mask, np.zeros(len(appended), dtype=bool)])
    return LmSequence(np.concatenate([sample.x, extra]), appended, labels, loss_mask, pad)


# ---------------------------------------------------------------- batches


@dataclass
class Batch:
    examples: list[Example]
    tokens: np.ndarray  # (B, K) appended-region inputs
    token_pad: np.ndarray  # (B, K)
    labels: np.ndarray  # (B, L + K)
    loss_mask: np.ndarray  # (B, L + K)

    @property
    def ids(self):
        return [e.id for e in self.examples]


def make_batch(examples: list[Example], L: int, with_targets=True, prefixes=None) -> Batch:
    """Stack examples; the final <stop> of each layout is a label, never an input."""
    rows, labels, masks = [], [], []
    for i, ex in enumerate(examples):
        if with_targets:
            appended, lab, msk = lm_layout(L, ex.target_ids)
            appended, lab, msk = appended[:-1], lab[:-1], msk[:-1]
        else:
            prefix = [] if prefixes is None else list(prefixes[i])
            appended = [DELIM_ID] + prefix
            lab = np.zeros(L + len(appended), dtype=np.int64)
            msk = np.zeros(L + len(appended), dtype=bool)
        rows.append(appended)
        labels.append(lab)
        masks.append(msk)
    K = max(len(r) for r in rows)
    B = len(examples)
    tokens = np.full((B, K), PAD_ID, dtype=np.int64)
    token_pad = np.ones((B, K), dtype=bool)
    lab_arr = np.zeros((B, L + K), dtype=np.int64)
    mask_arr = np.zeros((B, L + K), dtype=bool)
    for i, r in enumerate(rows):
        tokens[i, : len(r)] = r
        token_pad[i, : len(r)] = False
        lab_arr[i, : len(labels[i])] = labels[i]
        mask_arr[i, : len(masks[i])] = masks[i]
    return Batch(list(examples), tokens, token_pad, lab_arr, mask_arr)


# ---------------------------------------------------------------- forward


def encode_text(model: FmtModel, examples: list[Example]):
    """Fused textual stream per example, padded to ``L``: ``(B, L, d_t)`` plus presence."""
    cfg, seq = model.config, model.seq
    L, B = seq.L, len(examples)
    groups: dict[tuple[int, int], list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault((len(ex.asr_ids), len(ex.ocr_ids)), []).append(i)
    present = np.zeros((B, L), dtype=bool)
    pieces: dict[int, Tensor] = {}
    for (n, m), idx in groups.items():
        if n + m == 0:
            stream = Tensor(np.zeros((len(idx), L, cfg.d_t)))
            if len(groups) == 1:
                return stream, present
            for k, i in enumerate(idx):
                pieces[i] = ops.slice(stream, 0, k, k + 1)
            continue
        asr_ids = np.stack([examples[i].asr_ids for i in idx]) if n else None
        ocr = ops.embed(model["text_embed"], np.stack([examples[i].ocr_ids for i in idx])) if m else None
        if n:
            asr = ops.embed(model["text_embed"], asr_ids)
            if m:
                fused = fuse(asr, ocr, model["fusion.w_b"], gating=cfg.gating, ocr_cap=cfg.ocr_cap).fused
            else:
                fused = asr
        else:
            fused = ocr
        length = fused.shape[-2]
        if seq.text_rate != seq.reference_rate:
            rows = resample_indices(length, seq.text_rate, seq.reference_rate)
            fused = ops.concat([ops.slice(fused, -2, j, j + 1) for j in rows], axis=-2)
            length = len(rows)
        stream = pad_tensor_stream(fused, L, warn=False)
        present[idx, : min(length, L)] = True
        if len(groups) == 1:
            return stream, present
        if len(idx) == 1:
            pieces[idx[0]] = stream
        else:
            for k, i in enumerate(idx):
                pieces[i] = ops.slice(stream, 0, k, k + 1)
    return ops.concat([pieces[i] for i in range(B)], axis=0), present


def encode_source(model: FmtModel, examples: list[Example]):
    """Assembled ``(B, L, d_x)`` source blocks and the source pad mask."""
    visual = np.stack([e.visual for e in examples])
    acoustic = np.stack([e.acoustic for e in examples])
    vp = np.stack([e.visual_present for e in examples])
    ap = np.stack([e.acoustic_present for e in examples])
    text, tp = encode_text(model, examples)
    projections = [model.affine(f"proj.{m}") for m in ("visual", "acoustic", "textual")]
    x = project_blocks([visual, acoustic, text], [vp, ap, tp], projections)
    return x, ~(vp | ap | tp)


def sequence_inputs(model: FmtModel, batch: Batch):
    x_src, src_pad = encode_source(model, batch.examples)
    B, K = batch.tokens.shape
    d_b = model.config.d_b
    emb = ops.embed(model["token_embed"], batch.tokens)
    appended = ops.concat([Tensor(np.zeros((B, K, 2 * d_b))), emb], axis=-1)
    x = ops.concat([x_src, appended], axis=1)
    return x, np.concatenate([src_pad, batch.token_pad], axis=1)


def forward(model: FmtModel, batch: Batch, training=False, rng=None, dropout=0.0) -> Tensor:
    """Logits ``(B, L + K, |V|)`` for every position of the batch."""
    x, pad = sequence_inputs(model, batch)
    states = fmt_forward(model, x, pad, training=training, rng=rng, dropout=dropout)
    return head_logits(model, states, pad)


def batch_loss(model, batch, training=False, rng=None, dropout=0.0) -> Tensor:
    logits = forward(model, batch, training, rng, dropout)
    return ops.cross_entropy(logits, batch.labels, batch.loss_mask)


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, params):
        return cls(0, {k: np.zeros_like(p.data) for k, p in params.items()},
                   {k: np.zeros_like(p.data) for k, p in params.items()})


def learning_rate(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to the peak, then linear decay to zero at ``total_steps``."""
    if cfg.warmup_steps and step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    span = max(cfg.total_steps - cfg.warmup_steps, 1)
    return cfg.peak_lr * max(0.0, (cfg.total_steps - step) / span)


@dataclass
class StepResult:
    loss: float
    skipped: bool = False
    lr: float = 0.0
    grad_norm: float = 0.0


def train_step(model: FmtModel, batch: Batch, state: AdamState, cfg: TrainConfig, rng=None) -> StepResult:
    """One Adam update on the target-only loss, with global-norm clipping."""
    if not batch.loss_mask.any():
        return StepResult(float("nan"), skipped=True)
    with Tape() as tape:
        try:
            loss = batch_loss(model, batch, training=True, rng=rng, dropout=cfg.dropout)
        except NumericError as exc:
            raise NumericError(f"{exc} (batch samples {batch.ids})", exc.node_id, batch.ids) from None
    if not math.isfinite(loss.item()):
        raise NumericError(f"non-finite loss on samples {batch.ids}", sample_id=batch.ids)
    table = tape.backward(loss)
    grads = {k: table.get(p) for k, p in model.params.items()}
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values() if g is not None))
    clip = min(1.0, cfg.clip_norm / (norm + 1e-12))
    state.step += 1
    lr = learning_rate(state.step, cfg)
    b1, b2 = cfg.beta1, cfg.beta2
    c1, c2 = 1.0 - b1**state.step, 1.0 - b2**state.step
    for k, p in model.params.items():
        g = grads[k]
        if g is None:
            g = np.zeros_like(p.data)
        else:
            g = g * clip
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        p.data = p.data - lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + cfg.adam_eps)
    return StepResult(loss.item(), lr=lr, grad_norm=norm)


def evaluate_loss(model: FmtModel, examples: list[Example], batch_size=16) -> float:
    """Token-weighted mean target-only cross-entropy in eval mode."""
    total, count = 0.0, 0
    for start in range(0, len(examples), batch_size):
        batch = make_batch(examples[start : start + batch_size], model.seq.L)
        n = int(batch.loss_mask.sum())
        if n:
            total += batch_loss(model, batch).item() * n
            count += n
    if count == 0:
        raise ContractError("no target positions to evaluate")
    return total / count


# ---------------------------------------------------------------- training loop


def batch_indices(step: int, n_examples: int, batch_size: int, seed: int) -> np.ndarray:
    """Examples for 0-based ``step``; a function of (seed, epoch) only."""
    per_epoch = math.ceil(n_examples / batch_size)
    epoch, pos = divmod(step, per_epoch)
    perm = np.random.default_rng([seed, epoch]).permutation(n_examples)
    return perm[pos * batch_size : (pos + 1) * batch_size]


def step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, step, 0xD0])


@dataclass
class TrainResult:
    step: int
    best_val: float | None
    history: list[dict]


def train(
    model: FmtModel,
    train_examples: list[Example],
    val_examples: list[Example],
    config: RunConfig,
    vocab: VocabSpec,
    out_dir,
    resume=None,
    stop_at: int | None = None,
) -> TrainResult:
    """Train with periodic validation; keeps ``out_dir/best`` and ``out_dir/last``.

    ``out_dir/metrics.jsonl`` gains one ``{step, train_loss, val_loss}`` line
    per evaluation. ``resume`` names a checkpoint written by this loop;
    ``stop_at`` ends the run early (for resumption tests) while keeping the
    schedule of the full run.
    """
    from mmsumm.model.checkpoint import load_checkpoint, save_checkpoint

    if not train_examples:
        raise ContractError("training set is empty")
    tc = config.training
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = AdamState.zeros(model.params)
    best_val = None
    if resume is not None:
        loaded = load_checkpoint(resume)
        model.params = loaded.model.params
        state = loaded.optimizer
        best_val = loaded.train_state.get("best_val")
    end = tc.total_steps if stop_at is None else min(stop_at, tc.total_steps)
    history = []
    window = []
    metrics_path = out / "metrics.jsonl"
    while state.step < end:
        idx = batch_indices(state.step, len(train_examples), tc.batch_size, config.seed)
        batch = make_batch([train_examples[i] for i in idx], model.seq.L)
        res = train_step(model, batch, state, tc, step_rng(config.seed, state.step))
        if not res.skipped:
            window.append(res.loss)
        if state.step % tc.eval_interval == 0 or state.step == end:
            val = evaluate_loss(model, val_examples, tc.batch_size) if val_examples else None
            record = {
                "step": state.step,
                "train_loss": float(np.mean(window)) if window else None,
                "val_loss": val,
            }
            window = []
            history.append(record)
            with open(metrics_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
            log.info("step %d train %.4f val %s", state.step, record["train_loss"] or float("nan"), val)
            score = val if val is not None else record["train_loss"]
            improved = score is not None and (best_val is None or score < best_val)
            if improved:
                best_val = score
            train_state = {"step": state.step, "best_val": best_val}
            if improved:
                save_checkpoint(out / "best", model, config, vocab, state, train_state)
            save_checkpoint(out / "last", model, config, vocab, state, train_state)
    return TrainResult(state.step, best_val, history)


# ---------------------------------------------------------------- generation


def generate_batch(model: FmtModel, examples: list[Example], max_len: int, prefixes=None) -> list[list[int]]:
    """Greedy decoding; each new token is appended and the whole model re-run.

    Stops at <stop> or ``max_len`` tokens; <stop> is not returned. Equal
    logits resolve to the lowest token id.
    """
    L = model.seq.L
    max_len = min(max_len, model.seq.M_max)
    out = [list(p) for p in prefixes] if prefixes is not None else [[] for _ in examples]
    done = [len(o) >= max_len for o in out]
    while not all(done):
        active = [i for i, d in enumerate(done) if not d]
        batch = make_batch([examples[i] for i in active], L, with_targets=False, prefixes=[out[i] for i in active])
        logits = forward(model, batch).data
        for row, i in enumerate(active):
            last = L + len(out[i])  # position of the latest appended token
            tok = int(np.argmax(logits[row, last]))
            if tok == STOP_ID:
                done[i] = True
            else:
                out[i].append(tok)
                done[i] = len(out[i]) >= max_len
    return out


def generate(model: FmtModel, example: Example, max_len: int, prefix=None) -> list[int]:
    return generate_batch(model, [example], max_len, None if prefix is None else [prefix])[0]


def token_accuracy(predicted: list[list[int]], targets: list[list[int]]) -> float:
    """Fraction of target positions whose generated token matches (missing = wrong)."""
    hits = total = 0
    for p, t in zip(predicted, targets):
        total += len(t)
        hits += sum(1 for a, b in zip(p, t) if a == b)
    return hits / total if total else 0.0


# ---------------------------------------------------------------- gradient check


def _loss_and_kinks(model, batch):
    """Batch loss plus the on/off pattern of every ReLU in the forward pass."""
    with Tape() as tape:
        loss = batch_loss(model, batch)
    masks = [n.ctx for n in tape.nodes if n.primitive == "relu"]
    return loss.item(), masks


def _same_kinks(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def check_model_gradients(
    model: FmtModel, batch: Batch, entries_per_param=2, seed=0, h=1e-5, names=None, max_tries=50
) -> dict:
    """Tape gradients of the batch loss against central differences.

    Checks ``entries_per_param`` random entries of every parameter in
    ``names`` (default: all but the inert key biases, whose true gradient is
    zero and so only measures roundoff) and returns ``{name: max relative
    error}``. Entries whose +-h perturbation flips any ReLU are redrawn,
    since a central difference across the kink does not estimate the
    derivative.
    """
    from mmsumm.autodiff.gradcheck import relative_error
    from mmsumm.model.params import inert_parameters

    rng = np.random.default_rng(seed)
    with Tape() as tape:
        loss = batch_loss(model, batch)
    base_kinks = [n.ctx for n in tape.nodes if n.primitive == "relu"]
    table = tape.backward(loss)
    report = {}
    if names is None:
        skip = set(inert_parameters(model.params))
        names = [n for n in model.params if n not in skip]
    for name in names:
        p = model.params[name]
        analytic = table.get(p, np.zeros_like(p.data)).reshape(-1)
        flat = p.data.reshape(-1)
        worst, checked, tries = 0.0, 0, 0
        while checked < min(entries_per_param, flat.size) and tries < max_tries:
            tries += 1
            k = int(rng.integers(flat.size))
            orig = flat[k]
            flat[k] = orig + h
            fp, kp = _loss_and_kinks(model, batch)
            flat[k] = orig - h
            fm, km = _loss_and_kinks(model, batch)
            flat[k] = orig
            if not (_same_kinks(kp, base_kinks) and _same_kinks(km, base_kinks)):
                continue
            worst = max(worst, float(relative_error(analytic[k], (fp - fm) / (2 * h))))
            checked += 1
        if checked == 0:
            raise NumericError(f"no kink-free entry found for {name}")
        report[name] = worst
    return report
