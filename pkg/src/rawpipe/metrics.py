"""Evaluation protocol: uint8 quantization, border crop, color PSNR and SSIM.

Images are ``(3, H, W)`` arrays.  Metrics crop the border *before* touching
any pixel, so nothing within ``crop`` pixels of the edge can influence a
reported number.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

PSNR_INF = math.inf


@dataclass(frozen=True)
class EvalProtocol:
    border_crop: int = 10
    peak: float = 255.0
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    def describe(self) -> str:
        return (f"uint8 round-half-away, crop={self.border_crop}px, PSNR pooled over RGB, "
                f"SSIM mean of R,G,B ({self.ssim_window}x{self.ssim_window} Gaussian "
                f"sigma={self.ssim_sigma}, K1={self.k1}, K2={self.k2}, L={self.peak:g})")


def quantize(x) -> np.ndarray:
    """Clamp to [0, 255], round half away from zero, return uint8."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 255.0)
    return np.floor(x + 0.5).astype(np.uint8)


def _crop(x, crop: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[None]
    h, w = x.shape[-2:]
    if crop < 0 or 2 * crop >= min(h, w):
        raise ValueError(f"crop {crop} too large for {h}x{w} image")
    if crop == 0:
        return x.astype(np.float64)
    return x[..., crop:h - crop, crop:w - crop].astype(np.float64)


def psnr(ref, test, crop: int = 10, peak: float = 255.0) -> float:
    """Color PSNR: MSE pooled over all channels of the cropped images.

    Returns ``math.inf`` for identical crops.
    """
    if np.shape(ref) != np.shape(test):
        raise ValueError(f"shape mismatch {np.shape(ref)} vs {np.shape(test)}")
    a, b = _crop(ref, crop), _crop(test, crop)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r * r) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    half = len(g) // 2
    y = ndimage.correlate1d(x, g, axis=0, mode="nearest")
    y = ndimage.correlate1d(y, g, axis=1, mode="nearest")
    return y[half:-half, half:-half]


def ssim_plane(a: np.ndarray, b: np.ndarray, protocol: EvalProtocol = EvalProtocol()) -> float:
    """Mean SSIM of one channel over the 'valid' window positions."""
    g = _gaussian_window(protocol.ssim_window, protocol.ssim_sigma)
    c1 = (protocol.k1 * protocol.peak) ** 2
    c2 = (protocol.k2 * protocol.peak) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a ** 2
    sbb = _filter_valid(b * b, g) - mu_b ** 2
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


def ssim(ref, test, crop: int = 10, protocol: EvalProtocol = EvalProtocol()) -> float:
    """Per-channel SSIM averaged over channels."""
    if np.shape(ref) != np.shape(test):
        raise ValueError(f"shape mismatch {np.shape(ref)} vs {np.shape(test)}")
    a, b = _crop(ref, crop), _crop(test, crop)
    if min(a.shape[-2:]) < protocol.ssim_window:
        raise ValueError(f"image too small for SSIM after crop: {a.shape[-2:]}")
    return float(np.mean([ssim_plane(a[c], b[c], protocol) for c in range(a.shape[0])]))


@dataclass
class EvalRow:
    name: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    title: str = ""
    protocol: EvalProtocol = field(default_factory=EvalProtocol)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["image", "psnr_db", "ssim"])
        for r in self.rows:
            w.writerow([r.name, _fmt_psnr(r.psnr, 6), f"{r.ssim:.6f}"])
        w.writerow(["mean", _fmt_psnr(self.mean_psnr, 6), f"{self.mean_ssim:.6f}"])
        return buf.getvalue()

    def to_table(self) -> str:
        width = max([len(r.name) for r in self.rows] + [len("mean"), len("image")])
        lines = []
        if self.title:
            lines.append(self.title)
        lines.append(f"# {self.protocol.describe()}")
        lines.append(f"{'image':<{width}}  PSNR/SSIM")
        for r in self.rows:
            lines.append(f"{r.name:<{width}}  {_fmt_psnr(r.psnr, 2)}/{r.ssim:.4f}")
        lines.append(f"{'mean':<{width}}  {_fmt_psnr(self.mean_psnr, 2)}/{self.mean_ssim:.4f}")
        for name, msg in self.errors:
            lines.append(f"# excluded {name}: {msg}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        txt_path = out_dir / f"{stem}.txt"
        csv_path.write_text(self.to_csv())
        txt_path.write_text(self.to_table())
        return csv_path, txt_path


def _fmt_psnr(v: float, digits: int) -> str:
    return "inf" if math.isinf(v) else f"{v:.{digits}f}"


def score(ref, recon, protocol: EvalProtocol = EvalProtocol()) -> tuple[float, float]:
    """Quantize both images, then PSNR and SSIM on the cropped result."""
    q_ref, q_rec = quantize(ref), quantize(recon)
    crop = protocol.border_crop
    return psnr(q_ref, q_rec, crop, protocol.peak), ssim(q_ref, q_rec, crop, protocol)
