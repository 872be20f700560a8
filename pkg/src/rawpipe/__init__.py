"""Residual-CNN demosaicking and denoising of Bayer CFA images."""

from .cfa import BayerPattern, CfaImage, CfaMask, NoiseSpec, add_noise, make_mask, mosaic
from .classical import DemosaicMethod, demosaic, demosaic_bilinear, demosaic_gbtf, demosaic_ha
from .metrics import EvalProtocol, EvalReport, psnr, quantize, score, ssim

__version__ = "0.1.0"

__all__ = [
    "BayerPattern", "CfaImage", "CfaMask", "NoiseSpec", "add_noise", "make_mask", "mosaic",
    "DemosaicMethod", "demosaic", "demosaic_bilinear", "demosaic_gbtf", "demosaic_ha",
    "EvalProtocol", "EvalReport", "psnr", "quantize", "score", "ssim",
]
