"""Finite-difference gradient suite over every layer and both loss compositions."""

from __future__ import annotations

import numpy as np

from .cfa import BayerPattern, mosaic
from .nn.gradcheck import check_module
from .nn.layers import BatchNorm2d, Block, Concat, Conv2d, Network, ReLU, Sequential
from .nn.optim import he_init
from .nn.specs import BlockKind, BlockSpec, NetworkSpec
from .pipeline import DemosaicObjective, DenoiseObjective, LossModule, batch_masks

TOLERANCE = 1e-6


def _jitter(module, rng):
    """Random biases and BN affine terms so no gradient is trivially structured."""
    for m in module.modules():
        if isinstance(m, Conv2d):
            m.bias.value[...] = 0.1 * rng.standard_normal(m.bias.value.shape)
        elif isinstance(m, BatchNorm2d):
            m.gamma.value[...] = 1 + 0.2 * rng.standard_normal(m.gamma.value.shape)
            m.beta.value[...] = 0.2 * rng.standard_normal(m.beta.value.shape)
    return module


def _tiny_net(seed, rng, kind="inception", n_blocks=1):
    net = he_init(Network(NetworkSpec(kind, n_blocks)), seed)
    return _jitter(net, rng)


def _case(name, seed):
    rng = np.random.default_rng([seed, 17])
    if name == "conv1x1":
        return _jitter(he_init(Conv2d(3, 4, 1), seed), rng), rng.standard_normal((2, 3, 5, 5)), None
    if name == "conv3x3":
        return _jitter(he_init(Conv2d(2, 3, 3), seed), rng), rng.standard_normal((2, 2, 5, 5)), None
    if name in ("batchnorm-train", "batchnorm-eval"):
        bn = _jitter(BatchNorm2d(3), rng)
        if name.endswith("eval"):
            bn.running_mean[...] = rng.standard_normal(3)
            bn.running_var[...] = rng.uniform(0.5, 2.0, 3)
            bn.eval()
        return bn, rng.standard_normal((4, 3, 3, 3)), None
    if name == "relu":
        # keep entries away from the kink so every coordinate is checkable
        x = rng.standard_normal((2, 3, 4, 4))
        x += 0.1 * np.sign(x)
        return ReLU(), x, None
    if name == "concat":
        cat = Concat(Sequential(Conv2d(3, 2, 1)), Sequential(Conv2d(3, 1, 3)), Sequential(Conv2d(3, 3, 1)))
        return _jitter(he_init(cat, seed), rng), rng.standard_normal((2, 3, 4, 4)), None
    if name.startswith("block-"):
        kind = BlockKind.parse(name[len("block-"):])
        blk = _jitter(he_init(Block(BlockSpec(kind)), seed), rng)
        return blk, rng.standard_normal((2, 64, 4, 4)), 12
    if name == "network":
        return _tiny_net(seed, rng), rng.uniform(0, 1, (2, 3, 5, 5)), 12
    if name in ("loss-dm", "loss-dn"):
        net = _tiny_net(seed, rng)
        target = rng.uniform(0, 255, (2, 3, 6, 6))
        if name == "loss-dm":
            pattern = list(BayerPattern)[seed % 4]
            m = batch_masks(pattern, 2, 6, 6)
            retained = np.stack([mosaic(t, pattern).embed() for t in target])
            obj = DemosaicObjective(net, m, retained)
        else:
            obj = DenoiseObjective(net)
        x = target + rng.normal(0, 10, target.shape)
        return LossModule(obj, target), x, 12
    raise KeyError(name)


CASES = ("conv1x1", "conv3x3", "batchnorm-train", "batchnorm-eval", "relu", "concat",
         "block-inception", "block-inception-", "block-conv-bn-relu", "network", "loss-dm", "loss-dn")


def run_case(name: str, seed: int) -> float:
    """Worst relative error of one case over the input and all parameters."""
    module, x, max_entries = _case(name, seed)
    errors = check_module(module, x, seed=seed, max_entries=max_entries)
    return max(errors.values())


def run_suite(seeds=range(20), cases=CASES) -> dict[str, float]:
    """Worst relative error per case across ``seeds``."""
    return {c: max(run_case(c, s) for s in seeds) for c in cases}
