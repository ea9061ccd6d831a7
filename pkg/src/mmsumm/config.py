"""Run configuration: one JSON document, unknown keys rejected."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from mmsumm.errors import ConfigError

CONFIG_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d_v: int = 16
    d_a: int = 16
    d_t: int = 16
    d_b: int = 16
    n_layers: int = 2
    n_fms: int = 1
    d_ff: int = 128
    d_y: int = 16
    heads: int = 1
    tie_embeddings: bool = False
    gating: bool = True
    ocr_cap: int = 500
    ln_eps: float = 1e-8

    @property
    def d_x(self):
        return 3 * self.d_b

    def validate(self):
        for name in ("d_v", "d_a", "d_t", "d_b", "n_layers", "n_fms", "d_ff", "d_y", "heads", "ocr_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be positive")
        if self.tie_embeddings and self.d_y != self.d_b:
            raise ConfigError("tied embeddings need d_y == d_b")
        if self.d_b % self.heads:
            raise ConfigError("d_b must be divisible by heads")


@dataclass(frozen=True)
class SequenceConfig:
    L: int = 16
    M_max: int = 4
    reference_rate: float = 1.0
    visual_rate: float = 0.5
    acoustic_rate: float = 2.0
    text_rate: float = 1.0

    @property
    def max_positions(self):
        return self.L + self.M_max + 1

    def validate(self):
        if self.L < 1 or self.M_max < 1:
            raise ConfigError("sequence.L and sequence.M_max must be positive")
        for name in ("reference_rate", "visual_rate", "acoustic_rate", "text_rate"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"sequence.{name} must be positive")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    total_steps: int = 500_000
    peak_lr: float = 0.01
    warmup_steps: int = 2000
    dropout: float = 0.1
    clip_norm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_interval: int = 1000
    val_fraction: float = 0.1
    min_frequency: int = 1

    def validate(self):
        for name in ("batch_size", "total_steps", "peak_lr", "clip_norm", "eval_interval"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"training.{name} must be positive")
        if self.warmup_steps < 0:
            raise ConfigError("training.warmup_steps must be >= 0")
        if not 0 <= self.dropout < 1:
            raise ConfigError("training.dropout must be in [0, 1)")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("training.val_fraction must be in [0, 1)")


@dataclass(frozen=True)
class PathsConfig:
    data: str | None = None
    out: str | None = None


@dataclass(frozen=True)
class RunConfig:
    profile: str = "toy"
    model: ModelConfig = field(default_factory=ModelConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0
    config_version: int = CONFIG_VERSION

    def validate(self):
        if self.profile not in ("toy", "full"):
            raise ConfigError(f"profile must be 'toy' or 'full', got {self.profile!r}")
        if self.config_version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {self.config_version}")
        self.model.validate()
        self.sequence.validate()
        self.training.validate()
        return self

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        base = profile_config(doc.get("profile", "toy")) if isinstance(doc, dict) else None
        return _build(cls, doc, "", base).validate()

    @classmethod
    def from_json(cls, text) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


_NESTED = {"model": ModelConfig, "sequence": SequenceConfig, "training": TrainConfig, "paths": PathsConfig}


def _build(cls, doc, prefix, base):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix or 'config'} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    values = {}
    for key, value in doc.items():
        if key in _NESTED and cls is RunConfig:
            values[key] = _build(_NESTED[key], value, f"{key}.", getattr(base, key))
        else:
            values[key] = value
    return replace(base, **values) if base is not None else cls(**values)


def profile_config(name: str) -> RunConfig:
    """Default configuration for a profile; all values are engineering choices."""
    if name == "toy":
        return RunConfig(
            profile="toy",
            training=TrainConfig(total_steps=2000, warmup_steps=200, eval_interval=100),
        )
    if name == "full":
        return RunConfig(
            profile="full",
            model=ModelConfig(
                d_v=2048, d_a=512, d_t=768, d_b=256, n_layers=4, n_fms=2, d_ff=3072, d_y=256
            ),
            sequence=SequenceConfig(L=64, M_max=8),
        )
    raise ConfigError(f"unknown profile {name!r}")
