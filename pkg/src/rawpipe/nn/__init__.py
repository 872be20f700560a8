"""Minimal NCHW neural-network engine with hand-written backward passes."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm2d,
    Block,
    Concat,
    Conv2d,
    Module,
    Network,
    Parameter,
    ReLU,
    Sequential,
    build_block,
    build_network,
)
from .optim import Adam, AdamState, adam_step, he_init, lr_schedule
from .specs import BlockKind, BlockSpec, NetworkSpec, param_count

__all__ = [
    "Adam", "AdamState", "BatchNorm2d", "Block", "BlockKind", "BlockSpec", "Concat",
    "Conv2d", "Module", "Network", "NetworkSpec", "Parameter", "ReLU", "Sequential",
    "adam_step", "build_block", "build_network", "he_init", "load_checkpoint",
    "lr_schedule", "param_count", "save_checkpoint",
]
