"""Demosaick-then-denoise with two residual CNNs.

Stage 1 refines a classical demosaick (GBTF by default) with a predicted
residual and then puts the CFA samples back untouched::

    x_dm = (1 - M) .* (x_pre + F(x_pre)) + M .* samples

Stage 2 predicts the noise-plus-artifact field left in ``x_dm`` and
subtracts it::

    x_dmdn = x_dm - G(x_dm)

Networks see images divided by 255 and their outputs are multiplied by 255,
so residuals are expressed on the 0-255 pixel scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classical
from .cfa import BayerPattern, CfaImage, make_mask
from .nn.layers import Module, Network, Parameter

SCALE = 255.0


class UntrainedStageError(RuntimeError):
    """A stage was used for inference before it had a network."""


class OffProtocolWarning(UserWarning):
    """Inference outside the train/test protocol (e.g. denoising twice)."""


class Reconstruction(np.ndarray):
    """``(3, H, W)`` array that remembers which stages produced it."""

    history: tuple = ()

    def __array_finalize__(self, obj):
        self.history = getattr(obj, "history", ())


def _stamp(x: np.ndarray, history: tuple) -> Reconstruction:
    out = np.asarray(x).view(Reconstruction)
    out.history = tuple(history)
    return out


@dataclass
class DemosaicStage:
    net: Network | None
    preprocess: classical.DemosaicMethod = classical.DemosaicMethod.GBTF
    pattern: BayerPattern = BayerPattern.RGGB
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.preprocess = classical.DemosaicMethod.parse(self.preprocess)
        self.pattern = BayerPattern.parse(self.pattern)

    def require(self) -> Network:
        if self.net is None:
            raise UntrainedStageError("demosaic stage has no trained network")
        return self.net


@dataclass
class DenoiseStage:
    net: Network | None
    sigma_tag: float
    trace: list = field(default_factory=list, repr=False)

    def require(self) -> Network:
        if self.net is None:
            raise UntrainedStageError(f"denoise stage (sigma={self.sigma_tag}) has no trained network")
        return self.net


@dataclass
class JointStage:
    """Single deep residual network mapping a noisy CFA straight to RGB."""

    net: Network | None
    sigma_tag: float
    preprocess: classical.DemosaicMethod = classical.DemosaicMethod.GBTF
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.preprocess = classical.DemosaicMethod.parse(self.preprocess)

    def require(self) -> Network:
        if self.net is None:
            raise UntrainedStageError("joint stage has no trained network")
        return self.net


def _predict(net: Network, x: np.ndarray) -> np.ndarray:
    """Residual prediction for one ``(3, H, W)`` image on the pixel scale."""
    net.eval()
    out = net.infer(x[None].astype(net.dtype) / SCALE)[0]
    return out.astype(np.float64) * SCALE


def demosaic_cnn(y: CfaImage, stage: DemosaicStage) -> Reconstruction:
    net = stage.require()
    x_pre = classical.demosaic(y, stage.preprocess)
    refined = x_pre + _predict(net, x_pre)
    m = y.mask().planes
    out = np.where(m > 0.5, y.samples[None], refined)
    return _stamp(out, ("demosaic",))


def denoise_cnn(x_dm: np.ndarray, stage: DenoiseStage, sigma: float | None = None) -> Reconstruction:
    net = stage.require()
    history = getattr(x_dm, "history", ())
    if "denoise" in history:
        warnings.warn("image was already denoised; a second pass is off-protocol",
                      OffProtocolWarning, stacklevel=2)
    if sigma is not None and sigma != stage.sigma_tag:
        warnings.warn(f"denoiser trained for sigma={stage.sigma_tag} applied at sigma={sigma}",
                      OffProtocolWarning, stacklevel=2)
    x = np.asarray(x_dm, dtype=np.float64)
    out = x - _predict(net, x)
    return _stamp(out, history + ("denoise",))


def full_pipeline(y_noisy: CfaImage, dm: DemosaicStage, dn: DenoiseStage,
                  sigma: float | None = None) -> Reconstruction:
    dm.require()
    dn.require()
    return denoise_cnn(demosaic_cnn(y_noisy, dm), dn, sigma)


def joint_cnn(y_noisy: CfaImage, stage: JointStage) -> Reconstruction:
    net = stage.require()
    x_pre = classical.demosaic(y_noisy, stage.preprocess)
    return _stamp(x_pre + _predict(net, x_pre), ("joint",))


def half_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """``sum ||pred_i - target_i||^2 / (2N)`` over a batch of N images."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    n = pred.shape[0] if pred.ndim == 4 else 1
    d = pred - target
    return float(np.sum(d * d) / (2 * n))


def half_mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    n = pred.shape[0] if pred.ndim == 4 else 1
    return (np.asarray(pred, dtype=np.float64) - target) / n


def loss_dm(target: np.ndarray, pred: np.ndarray) -> float:
    """Stage 1 loss; ``pred`` is the mask-retaining composition."""
    return half_mse(pred, target)


def loss_dn(target: np.ndarray, pred: np.ndarray) -> float:
    """Stage 2 loss on ``x_dm - G(x_dm)``."""
    return half_mse(pred, target)


class DemosaicObjective(Module):
    """Batch composition ``(1-M).*(x_pre + F(x_pre)) + M.*retained`` as a module.

    ``forward`` maps a preprocessed batch (pixel scale) to the composed
    prediction; ``backward`` routes gradients only through unmasked pixels.
    With ``retain=False`` the mask is ignored (plain residual learning).
    """

    def __init__(self, net: Network, mask: np.ndarray, retained: np.ndarray,
                 retain: bool = True):
        self.net = net
        self.mask = mask
        self.retained = retained
        self.retain = retain

    def children(self):
        yield "net", self.net

    def forward(self, x_pre):
        res = self.net.forward(np.asarray(x_pre) / SCALE).astype(np.float64) * SCALE
        full = np.asarray(x_pre, dtype=np.float64) + res
        if not self.retain:
            return full
        return np.where(self.mask > 0.5, self.retained, full)

    def backward(self, dout):
        d = dout * (1.0 - self.mask) if self.retain else dout
        dx_net = self.net.backward(d * SCALE).astype(np.float64) / SCALE
        return d + dx_net


class DenoiseObjective(Module):
    """``x_dm - G(x_dm)`` as a module over a batch on the pixel scale."""

    def __init__(self, net: Network):
        self.net = net

    def children(self):
        yield "net", self.net

    def forward(self, x_dm):
        x_dm = np.asarray(x_dm, dtype=np.float64)
        return x_dm - self.net.forward(x_dm / SCALE).astype(np.float64) * SCALE

    def backward(self, dout):
        d_in = self.net.backward(-dout * SCALE).astype(np.float64)
        return dout + d_in / SCALE


class LossModule(Module):
    """Wrap an objective so its forward returns the half-MSE loss as (1,1,1,1)."""

    def __init__(self, objective: Module, target: np.ndarray):
        self.objective = objective
        self.target = target
        self._pred = None

    def children(self):
        yield "objective", self.objective

    def forward(self, x):
        self._pred = self.objective.forward(x)
        return np.array(half_mse(self._pred, self.target)).reshape(1, 1, 1, 1)

    def backward(self, dout):
        g = half_mse_grad(self._pred, self.target) * float(np.asarray(dout).reshape(-1)[0])
        return self.objective.backward(g)


def batch_masks(pattern, n: int, h: int, w: int) -> np.ndarray:
    m = make_mask(pattern, h, w).planes
    return np.broadcast_to(m, (n, 3, h, w))


def parameters_snapshot(params: list[Parameter]) -> list[np.ndarray]:
    return [p.value.copy() for p in params]
