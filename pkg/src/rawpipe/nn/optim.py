"""He initialization, ADAM and the step-decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import BatchNorm2d, Conv2d, Module, Parameter

DECAY_RATE = 0.9
DECAY_EVERY = 3000


def lr_schedule(step: int, lr0: float, rate: float = DECAY_RATE,
                every: int = DECAY_EVERY) -> float:
    """``lr0 * rate ** floor(step / every)``."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return lr0 * rate ** (step // every)


def he_init(module: Module, seed: int) -> Module:
    """Conv weights ~ N(0, 2 / fan_in), zero biases, BN gamma=1 and beta=0."""
    rng = np.random.default_rng(seed)
    for m in module.modules():
        if isinstance(m, Conv2d):
            std = np.sqrt(2.0 / m.fan_in)
            w = rng.standard_normal(m.weight.value.shape) * std
            m.weight.value[...] = w
            m.bias.value[...] = 0
        elif isinstance(m, BatchNorm2d):
            m.gamma.value[...] = 1
            m.beta.value[...] = 0
            m.running_mean[...] = 0
            m.running_var[...] = 1
    return module


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def ensure(self, params):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        for p, m in zip(params, self.m):
            if p.shape != m.shape:
                raise ValueError("moment buffers do not match parameter shapes")


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              lr: float):
    """One bias-corrected ADAM update, in place.  Returns ``(params, state)``."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    state.ensure(params)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


class Adam:
    """ADAM over a module's parameters with the step-decay schedule."""

    def __init__(self, parameters: list[Parameter], lr0: float = 1e-2,
                 decay_rate: float = DECAY_RATE, decay_every: int = DECAY_EVERY,
                 state: AdamState | None = None):
        self.parameters = parameters
        self.lr0, self.decay_rate, self.decay_every = lr0, decay_rate, decay_every
        self.state = state or AdamState()

    @property
    def lr(self) -> float:
        return lr_schedule(self.state.step, self.lr0, self.decay_rate, self.decay_every)

    def step(self) -> float:
        lr = self.lr
        adam_step([p.value for p in self.parameters], [p.grad for p in self.parameters],
                  self.state, lr)
        return lr

    def zero_grad(self):
        for p in self.parameters:
            p.zero_grad()
