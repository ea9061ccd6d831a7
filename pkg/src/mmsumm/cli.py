"""Command line: ``mmsumm <command> [flags]``.

Every command prints one JSON document on stdout and logs on stderr.
Exit codes: 0 success, 1 contract violation or bad usage, 2 I/O failure,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from mmsumm.errors import ContractError, NumericError

log = logging.getLogger("mmsumm")

EXIT_CONTRACT, EXIT_IO, EXIT_NUMERIC = 1, 2, 3
GRADCHECK_TOL = 1e-4


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(doc):
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    from mmsumm.modality.synth import directory_digest, gen_synthetic_dataset, get_profile

    if args.samples < 0:
        raise ContractError("--samples must be >= 0")
    overrides = {}
    if args.redundant_fraction is not None:
        overrides["redundant_fraction"] = args.redundant_fraction
    profile = get_profile(args.profile, **overrides)
    records = gen_synthetic_dataset(args.samples, args.seed, profile, args.out)
    _emit(
        {
            "out": str(args.out),
            "samples": len(records),
            "seed": args.seed,
            "profile": args.profile,
            "digest": directory_digest(args.out),
        }
    )


def _load_config(path, profile):
    from mmsumm.config import RunConfig, profile_config

    if path is None:
        return profile_config(profile or "toy")
    return RunConfig.from_json(Path(path).read_text(encoding="utf-8"))


def cmd_train(args):
    from mmsumm.config import PathsConfig
    from mmsumm.pipeline import train_on_directory

    cfg = _load_config(args.config, args.profile)
    cfg = replace(
        cfg,
        paths=PathsConfig(
            data=str(args.data) if args.data else cfg.paths.data,
            out=str(args.out) if args.out else cfg.paths.out,
        ),
    )
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    if cfg.paths.data is None or cfg.paths.out is None:
        raise ContractError("train needs --data and --out (or paths in the config)")
    log.info("effective config:\n%s", cfg.to_json())
    outcome = train_on_directory(cfg, cfg.paths.data, cfg.paths.out)
    _emit(
        {
            "config": cfg.to_dict(),
            "steps": outcome.result.step,
            "best_val": outcome.result.best_val,
            "checkpoint": str(Path(cfg.paths.out) / "best"),
            "metrics": str(Path(cfg.paths.out) / "metrics.jsonl"),
            "parameters": outcome.model.parameter_count(),
        }
    )


def cmd_summarize(args):
    from mmsumm.pipeline import summarize_from_checkpoint

    rows = summarize_from_checkpoint(args.ckpt, args.data, args.sample, args.max_len)
    _emit({"summaries": [{"id": sid, "tokens": ids, "text": text} for sid, ids, text in rows]})


def cmd_rouge(args):
    from mmsumm.rouge import evaluate_corpus

    _emit(evaluate_corpus(args.hyp, args.ref).to_dict())


def cmd_mfcc(args):
    from mmsumm.audio import mfcc, read_wav
    from mmsumm.modality.features import write_feature_file

    feats = mfcc(read_wav(args.wav))
    write_feature_file(args.out, feats.frames)
    _emit({"out": str(args.out), "frames": int(feats.frames.shape[0]), "width": int(feats.frames.shape[1])})


def cmd_fuse(args):
    from mmsumm.fusion import fuse
    from mmsumm.modality.features import read_feature_file, write_feature_file

    asr, ocr, wb = (read_feature_file(p) for p in (args.asr, args.ocr, args.wb))
    res = fuse(asr, ocr, wb, gating=not args.no_gate)
    write_feature_file(args.out, res.fused.data)
    _emit(
        {
            "out": str(args.out),
            "shape": list(res.fused.shape),
            "gates": np.asarray(res.gates.data).tolist(),
            "gating": not args.no_gate,
        }
    )


def cmd_gradcheck(args):
    from mmsumm.autodiff.probes import primitive_suite
    from mmsumm.lm import check_model_gradients
    from mmsumm.model import inert_parameters
    from mmsumm.pipeline import toy_gradient_batch

    prims = primitive_suite(points=args.points)
    model, batch = toy_gradient_batch(args.seed)
    inert = set(inert_parameters(model.params))
    names = [n for n in model.params if n not in inert]
    if args.params:
        rng = np.random.default_rng(args.seed)
        names = [names[i] for i in sorted(rng.choice(len(names), size=min(args.params, len(names)), replace=False))]
    full = check_model_gradients(model, batch, entries_per_param=args.entries, seed=args.seed, names=names)
    worst = max(max(prims.values()), max(full.values()))
    _emit(
        {
            "max_rel_error": worst,
            "tolerance": GRADCHECK_TOL,
            "passed": worst < GRADCHECK_TOL,
            "primitives": prims,
            "model": full,
        }
    )
    if worst >= GRADCHECK_TOL:
        raise NumericError(f"gradient check failed: max relative error {worst:.3e}")


# ---------------------------------------------------------------- parser


def build_parser() -> Parser:
    p = Parser(prog="mmsumm", description="Multimodal summarization toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--samples", required=True, type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--profile", choices=("toy", "full"), default="toy")
    s.add_argument("--redundant-fraction", type=float, default=None, help="ablation variant (e.g. 0.5)")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model on a manifest directory")
    t.add_argument("--config", type=Path, help="RunConfig JSON; flags override its values")
    t.add_argument("--data", type=Path)
    t.add_argument("--out", type=Path)
    t.add_argument("--profile", choices=("toy", "full"), default=None, help="defaults when no --config")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("summarize", help="greedy summaries from a checkpoint")
    g.add_argument("--ckpt", required=True, type=Path)
    g.add_argument("--sample", required=True, action="append", help="sample id (repeatable)")
    g.add_argument("--max-len", type=int, default=None)
    g.add_argument("--data", type=Path, default=None, help="defaults to the checkpoint's data path")
    g.set_defaults(func=cmd_summarize)

    r = sub.add_parser("rouge", help="score line-aligned summaries")
    r.add_argument("--hyp", required=True, type=Path)
    r.add_argument("--ref", required=True, type=Path)
    r.set_defaults(func=cmd_rouge)

    m = sub.add_parser("mfcc", help="acoustic features from a 16-bit mono WAV")
    m.add_argument("--wav", required=True, type=Path)
    m.add_argument("--out", required=True, type=Path)
    m.set_defaults(func=cmd_mfcc)

    f = sub.add_parser("fuse", help="guided-attention fusion of ASR and OCR embeddings")
    f.add_argument("--asr", required=True, type=Path)
    f.add_argument("--ocr", required=True, type=Path)
    f.add_argument("--wb", required=True, type=Path)
    f.add_argument("--out", required=True, type=Path)
    f.add_argument("--no-gate", action="store_true", help="force every gate to 1")
    f.set_defaults(func=cmd_fuse)

    c = sub.add_parser("gradcheck", help="finite-difference check of primitives and the toy model")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--points", type=int, default=10, help="probes per primitive")
    c.add_argument("--params", type=int, default=5, help="random model parameters to check (0 = all)")
    c.add_argument("--entries", type=int, default=3, help="entries per checked parameter")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONTRACT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "max_len", 0) is None:
        args.max_len = 10**9  # capped by the checkpoint's M_max
    try:
        args.func(args)
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except ContractError as exc:
        log.error("%s", exc)
        return EXIT_CONTRACT
    except (ValueError, KeyError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONTRACT
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
