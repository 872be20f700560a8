"""Declarative descriptions of the Inception-family blocks and networks."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class BlockKind(enum.Enum):
    INCEPTION = "inception"
    INCEPTION_MINUS = "inception-"
    CONV_BN_RELU = "conv-bn-relu"

    @classmethod
    def parse(cls, name) -> "BlockKind":
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("_", "-")
        aliases = {
            "inception": cls.INCEPTION,
            "inception-": cls.INCEPTION_MINUS,
            "inception-minus": cls.INCEPTION_MINUS,
            "inception(-)": cls.INCEPTION_MINUS,
            "minus": cls.INCEPTION_MINUS,
            "conv-bn-relu": cls.CONV_BN_RELU,
            "convbnrelu": cls.CONV_BN_RELU,
            "conv": cls.CONV_BN_RELU,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown block kind {name!r}") from None


# Each branch is a list of (out_channels, kernel) conv layers, each followed
# by BatchNorm and ReLU.  Branch outputs are concatenated.
BRANCH_PLANS: dict[BlockKind, list[list[tuple[int, int]]]] = {
    BlockKind.INCEPTION: [
        [(32, 1), (16, 1)],
        [(32, 1), (32, 3), (16, 3)],
        [(32, 1), (32, 3), (32, 3)],
    ],
    BlockKind.INCEPTION_MINUS: [
        [(16, 1)],
        [(16, 1), (16, 3)],
        [(16, 1), (32, 3), (32, 3)],
    ],
    BlockKind.CONV_BN_RELU: [
        [(64, 3)],
    ],
}


@dataclass(frozen=True)
class BlockSpec:
    kind: BlockKind = BlockKind.INCEPTION
    channels: int = 64

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind.parse(self.kind))
        if self.channels != 64:
            raise ValueError("branch plans are defined for 64 feature channels only")
        out = sum(branch[-1][0] for branch in self.branches)
        if out != self.channels:
            raise ValueError(f"branches concatenate to {out} channels, expected {self.channels}")

    @property
    def branches(self) -> list[list[tuple[int, int]]]:
        return BRANCH_PLANS[self.kind]

    @property
    def depth(self) -> int:
        return max(len(b) for b in self.branches)

    @property
    def receptive_field(self) -> int:
        return 1 + max(sum(k - 1 for _, k in b) for b in self.branches)


@dataclass(frozen=True)
class NetworkSpec:
    """Head conv (3->64, 3x3) + ReLU, a body of blocks, linear tail conv (64->3)."""

    kind: BlockKind = BlockKind.INCEPTION
    n_blocks: int = 16
    in_channels: int = 3
    out_channels: int = 3
    width: int = 64

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind.parse(self.kind))
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")

    @property
    def block(self) -> BlockSpec:
        return BlockSpec(self.kind, self.width)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_blocks": self.n_blocks,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "width": self.width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**d)


def _conv_params(c_in: int, c_out: int, k: int) -> int:
    return c_out * c_in * k * k + c_out


def param_count(spec: BlockSpec | NetworkSpec, body_only: bool = False) -> int:
    """Conv weights + conv biases + BatchNorm scale/shift; running stats excluded."""
    if isinstance(spec, BlockSpec):
        total = 0
        for branch in spec.branches:
            c_in = spec.channels
            for c_out, k in branch:
                total += _conv_params(c_in, c_out, k) + 2 * c_out
                c_in = c_out
        return total
    body = spec.n_blocks * param_count(spec.block)
    if body_only:
        return body
    head = _conv_params(spec.in_channels, spec.width, 3)
    tail = _conv_params(spec.width, spec.out_channels, 3)
    return head + body + tail
