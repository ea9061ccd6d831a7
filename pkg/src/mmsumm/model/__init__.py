"""Factorized multimodal transformer, parameters and checkpoints."""

from mmsumm.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mmsumm.model.fmt import FmtModel, attention_mask, fmt_forward, fms_forward, gru_forward, head_logits
from mmsumm.model.params import FIELDS, count_params, field_blocks, inert_parameters, init_params, param_layout

__all__ = [
    "Checkpoint",
    "FIELDS",
    "FmtModel",
    "attention_mask",
    "count_params",
    "field_blocks",
    "fms_forward",
    "fmt_forward",
    "gru_forward",
    "head_logits",
    "inert_parameters",
    "init_params",
    "load_checkpoint",
    "param_layout",
    "save_checkpoint",
]
