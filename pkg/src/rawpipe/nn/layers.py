"""Layers with explicit forward/backward passes.

Every module caches what its backward pass needs during ``forward``;
``backward`` takes the upstream gradient, accumulates parameter gradients
into ``Parameter.grad`` and returns the gradient w.r.t. the module input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import functional as F
from .specs import BlockSpec, NetworkSpec


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0


class Module:
    training = True
    linear = False
    # when False, forward passes keep no activations (inference only)
    grad_enabled = True

    def children(self) -> Iterator[tuple[str, "Module"]]:
        return iter(())

    def own_parameters(self) -> Iterator[tuple[str, Parameter]]:
        return iter(())

    def own_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(())

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, p in self.own_parameters():
            yield prefix + name, p
        for cname, child in self.children():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, b in self.own_buffers():
            yield prefix + name, b
        for cname, child in self.children():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self.children():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def enable_grad(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.grad_enabled = mode
        return self

    def linearize(self, mode: bool = True) -> "Module":
        """Treat BatchNorm and ReLU as identities (receptive-field probes)."""
        for m in self.modules():
            m.linear = mode
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def n_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def __call__(self, x):
        return self.forward(x)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, dtype=np.float64):
        if kernel not in (1, 3):
            raise ValueError("kernel must be 1 or 3")
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.weight = Parameter(np.zeros((c_out, c_in, kernel, kernel), dtype=dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))
        self._x = None

    def own_parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias

    @property
    def fan_in(self) -> int:
        return self.c_in * self.kernel * self.kernel

    def forward(self, x):
        self._x = x if self.grad_enabled else None
        return F.conv2d_forward(x, self.weight.value, self.bias.value)

    def backward(self, dout):
        dx, dw, db = F.conv2d_backward(dout, self._x, self.weight.value)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float64):
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum, self.eps = momentum, eps
        self._cache = None

    def own_parameters(self):
        yield "gamma", self.gamma
        yield "beta", self.beta

    def own_buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def forward(self, x):
        if self.linear:
            return x
        out, cache = F.batchnorm_forward(
            x, self.gamma.value, self.beta.value, self.running_mean,
            self.running_var, self.training, self.momentum, self.eps,
        )
        self._cache = cache if self.grad_enabled else None
        return out

    def backward(self, dout):
        if self.linear:
            return dout
        dx, dg, db = F.batchnorm_backward(dout, self._cache)
        self.gamma.grad += dg
        self.beta.grad += db
        return dx


class ReLU(Module):
    def __init__(self):
        self._y = None

    def forward(self, x):
        if self.linear:
            return x
        y = F.relu_forward(x)
        self._y = y if self.grad_enabled else None
        return y

    def backward(self, dout):
        if self.linear:
            return dout
        return dout * (self._y > 0)


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def children(self):
        for i, layer in enumerate(self.layers):
            yield str(i), layer

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


def conv_bn_relu(c_in: int, c_out: int, kernel: int, dtype=np.float64) -> Sequential:
    return Sequential(Conv2d(c_in, c_out, kernel, dtype), BatchNorm2d(c_out, dtype=dtype), ReLU())


class Concat(Module):
    """Run branches on the same input and concatenate along channels."""

    def __init__(self, *branches: Module):
        self.branches = list(branches)
        self._splits = None

    def children(self):
        for i, b in enumerate(self.branches):
            yield f"b{i + 1}", b

    def forward(self, x):
        outs = [b.forward(x) for b in self.branches]
        self._splits = np.cumsum([o.shape[1] for o in outs])[:-1]
        return np.concatenate(outs, axis=1)

    def backward(self, dout):
        parts = np.split(dout, self._splits, axis=1)
        dx = None
        for b, d in zip(self.branches, parts):
            g = b.backward(np.ascontiguousarray(d))
            dx = g if dx is None else dx + g
        return dx


class Block(Module):
    """Multi-branch block with an additive identity skip: ``x + concat(...)``."""

    def __init__(self, spec: BlockSpec, dtype=np.float64):
        self.spec = spec
        branches = []
        for plan in spec.branches:
            units, c_in = [], spec.channels
            for c_out, k in plan:
                units.append(conv_bn_relu(c_in, c_out, k, dtype))
                c_in = c_out
            branches.append(Sequential(*units))
        self.body = Concat(*branches)

    def children(self):
        yield "body", self.body

    def forward(self, x):
        return x + self.body.forward(x)

    def backward(self, dout):
        return dout + self.body.backward(dout)


def build_block(spec: BlockSpec, dtype=np.float64) -> Block:
    return Block(spec, dtype)


class Network(Module):
    """Head conv + ReLU, ``n_blocks`` residual blocks, linear tail conv."""

    def __init__(self, spec: NetworkSpec, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.head = Sequential(Conv2d(spec.in_channels, spec.width, 3, dtype), ReLU())
        self.blocks = Sequential(*[Block(spec.block, dtype) for _ in range(spec.n_blocks)])
        self.tail = Conv2d(spec.width, spec.out_channels, 3, dtype)

    def children(self):
        yield "head", self.head
        yield "blocks", self.blocks
        yield "tail", self.tail

    def forward(self, x):
        x = np.asarray(x, dtype=self.dtype)
        return self.tail.forward(self.blocks.forward(self.head.forward(x)))

    def backward(self, dout):
        dout = np.asarray(dout, dtype=self.dtype)
        return self.head.backward(self.blocks.backward(self.tail.backward(dout)))

    @property
    def receptive_radius(self) -> int:
        """Pixels of context on each side that influence one output pixel."""
        return 2 + self.spec.n_blocks * (self.spec.block.receptive_field - 1) // 2

    def infer(self, x: np.ndarray, tile: int = 96) -> np.ndarray:
        """Cache-free forward over overlapping tiles.

        Each tile carries a halo of ``receptive_radius`` pixels, so the
        result equals a whole-image forward in eval mode.
        """
        was = self.grad_enabled
        self.enable_grad(False)
        try:
            n, _, h, w = x.shape
            if h <= tile and w <= tile:
                return self.forward(x)
            halo = self.receptive_radius
            out = np.empty((n, self.spec.out_channels, h, w), dtype=self.dtype)
            for i0 in range(0, h, tile):
                for j0 in range(0, w, tile):
                    i1, j1 = min(i0 + tile, h), min(j0 + tile, w)
                    a0, b0 = max(i0 - halo, 0), max(j0 - halo, 0)
                    a1, b1 = min(i1 + halo, h), min(j1 + halo, w)
                    y = self.forward(x[:, :, a0:a1, b0:b1])
                    out[:, :, i0:i1, j0:j1] = y[:, :, i0 - a0:i1 - a0, j0 - b0:j1 - b0]
            return out
        finally:
            self.enable_grad(was)

    def zero_(self) -> "Network":
        """Set every learnable parameter (including BN scale) to zero."""
        for p in self.parameters():
            p.value[...] = 0
        return self


def build_network(spec: NetworkSpec, dtype=np.float64) -> Network:
    return Network(spec, dtype)
